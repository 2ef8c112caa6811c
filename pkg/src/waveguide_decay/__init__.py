"""Collective single-photon decay of emitters coupled through a nanofiber.

Monte Carlo over random emitter placements around an optical nanofiber,
with guided (infinite-range) and free-space (short-range) couplings, plus
the fitting tools used to read super- and sub-radiant rates off the
ensemble-averaged guided signal.
"""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    DefectiveMatrixError,
    EmptyEnsembleError,
    FitError,
    ValidationError,
)
from .mode_model import ModeSpec, make_mode_spec
from .ensemble_sampler import (
    AtomConfig,
    AtomPosition,
    CloudComponent,
    CloudSpec,
    fixed_config,
    sample_config,
    substream,
)
from .coupling_kernels import CouplingMatrix, KernelOptions, build_coupling_matrix
from .excitation_dynamics import (
    InitialState,
    SignalTrace,
    SpectralDecomposition,
    decompose,
    evolve,
    guided_signal,
    initial_amplitudes,
    integrate_reference,
)
from .montecarlo_engine import AveragedDecay, RunSpec, convergence_report, run_ensemble
from .decay_analysis import (
    ExpFit,
    FitWindow,
    ResidualReport,
    fit_exponential,
    od_to_atoms,
    residual_report,
    split_compare,
    sweep_rate_vs_n,
)
