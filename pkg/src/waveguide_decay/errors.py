class ValidationError(ValueError):
    """Input outside its allowed range. ``field`` names the offending input."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DefectiveMatrixError(RuntimeError):
    """Eigenvector basis too ill-conditioned to expand the initial state."""


class AccuracyError(RuntimeError):
    """Reference integrator failed its step-halving self-check."""


class EmptyEnsembleError(RuntimeError):
    """Every realization was excluded from the average."""


class FitError(RuntimeError):
    """Least-squares fit did not converge or produced an unphysical result."""
