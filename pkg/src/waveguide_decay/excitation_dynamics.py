"""Single-excitation amplitudes under dB/dt = -Gamma B and the guided signal."""
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DefectiveMatrixError, ValidationError

COND_LIMIT = 1e8
DARK_THRESHOLD = 1e-12
MAX_STEP = 0.01


@dataclass(frozen=True, eq=False)
class InitialState:
    amplitudes: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.amplitudes, dtype=complex)
        if abs(np.vdot(b, b).real - 1.0) > 1e-10:
            raise ValidationError("amplitudes", "initial state must be normalized")
        object.__setattr__(self, "amplitudes", b)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    coefficients: np.ndarray
    defective: bool = False
    condition: float = 1.0


@dataclass(frozen=True, eq=False)
class SignalTrace:
    time_grid: np.ndarray
    intensity: np.ndarray
    amplitudes_final: np.ndarray
    norm: float = 1.0
    dark: bool = False


def initial_amplitudes(config, drive_direction, mode):
    """Timed-phase state b_j = exp(i k0 n.r_j) / sqrt(N) for a plane-wave drive along n."""
    n = np.asarray(drive_direction, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValidationError("drive_direction", "must be a unit 3-vector")
    phase = mode.k0 * (config.cartesian() @ n)
    return InitialState(np.exp(1j * phase) / np.sqrt(config.n_atoms))


def decompose(gamma_matrix, b0):
    entries = getattr(gamma_matrix, "entries", gamma_matrix)
    b = getattr(b0, "amplitudes", b0)
    n = entries.shape[-1]
    try:
        w, v = np.linalg.eig(entries)
        cond = np.linalg.cond(v)
        c = np.linalg.solve(v, b)
    except np.linalg.LinAlgError:
        nan = np.full(n, np.nan, dtype=complex)
        return SpectralDecomposition(nan, np.full((n, n), np.nan, dtype=complex), nan, True, np.inf)
    defective = not (np.isfinite(cond) and cond <= COND_LIMIT)
    return SpectralDecomposition(w, v, c, defective, float(cond))


def evolve(decomp, time_grid):
    """Amplitudes b_j(t_k) = sum_a c_a exp(-eta_a t_k) (v_a)_j, shape (N, T)."""
    if decomp.defective:
        raise DefectiveMatrixError(
            f"eigenvector condition number {decomp.condition:.3g} exceeds {COND_LIMIT:g}"
        )
    t = np.asarray(time_grid, dtype=float)
    modes = decomp.coefficients[:, None] * np.exp(-decomp.eigenvalues[:, None] * t[None, :])
    return decomp.eigenvectors @ modes


def _rk4_step_matrix(g, h):
    """One classical RK4 step for the linear system, applied to every basis vector."""
    x = np.eye(g.shape[0], dtype=complex)
    k1 = -g @ x
    k2 = -g @ (x + 0.5 * h * k1)
    k3 = -g @ (x + 0.5 * h * k2)
    k4 = -g @ (x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4(g, b, t, max_step):
    out = np.empty((b.size, t.size), dtype=complex)
    out[:, 0] = b
    cache = {}
    for k in range(1, t.size):
        span = t[k] - t[k - 1]
        steps = max(1, int(np.ceil(span / max_step - 1e-9)))
        key = (steps, span)
        if key not in cache:
            cache[key] = np.linalg.matrix_power(_rk4_step_matrix(g, span / steps), steps)
        b = cache[key] @ b
        out[:, k] = b
    return out


def integrate_reference(gamma_matrix, b0, time_grid, max_step=MAX_STEP):
    """Classical RK4 integration of dB/dt = -Gamma B, checked against a halved step.

    The step never exceeds ``max_step``, the grid spacing, or 0.02 / ||Gamma||
    (stiff near-field pairs). Returns the halved-step solution, shape (N, T).
    """
    g = np.asarray(getattr(gamma_matrix, "entries", gamma_matrix), dtype=complex)
    b = np.asarray(getattr(b0, "amplitudes", b0), dtype=complex)
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0):
        raise ValidationError("time_grid", "must be strictly increasing")
    scale = np.linalg.norm(g, 2)
    h = max_step if scale == 0 else min(max_step, 0.02 / scale)
    coarse = _rk4(g, b, t, h)
    fine = _rk4(g, b, t, 0.5 * h)
    ref = np.abs(fine) ** 2
    err = np.abs(np.abs(coarse) ** 2 - ref)
    if np.any(err > 1e-4 * np.maximum(ref, 1e-12 * ref[:, :1].sum())):
        raise AccuracyError("step-halving disagreement above 1e-4")
    return fine


def propagate(gamma_matrix, b0, time_grid):
    """Eigen-expansion amplitudes, falling back to the RK4 path when defective."""
    decomp = decompose(gamma_matrix, b0)
    if decomp.defective:
        return integrate_reference(gamma_matrix, b0, time_grid)
    return evolve(decomp, time_grid)


def detection_weights(config, mode, polarization=1):
    """Guided-mode phasors exp(i(beta0 z_j + p phi_j)) for forward detection.

    Whole-period offsets contribute exactly 2 pi m and are left out.
    """
    return np.exp(1j * (mode.beta0 * config.z + polarization * config.phi))


def guided_signal(amplitudes, config, mode, time_grid=None, both_polarizations=False):
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.ndim == 1:
        amps = amps[:, None]
    if amps.shape[0] != config.n_atoms:
        raise ValidationError("amplitudes", "row count must equal the number of atoms")
    raw = np.abs(detection_weights(config, mode) @ amps) ** 2
    if both_polarizations:
        raw = raw + np.abs(detection_weights(config, mode, -1) @ amps) ** 2
    t = np.arange(amps.shape[1], dtype=float) if time_grid is None else np.asarray(time_grid)
    norm = float(raw[0])
    if norm < DARK_THRESHOLD:
        return SignalTrace(t, raw, amps[:, -1], norm, dark=True)
    return SignalTrace(t, raw / norm, amps[:, -1], norm)
