"""Windowed exponential fits, residual diagnostics, OD conversion, N sweeps."""
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from .ensemble_sampler import CloudSpec
from .errors import FitError, ValidationError
from .montecarlo_engine import run_ensemble, window_mask

MIN_BINS = 5
STDERR_FLOOR = 1e-9
RATE_FLOOR = 1e-9


@dataclass(frozen=True)
class FitWindow:
    t_start: float
    t_end: float

    def __post_init__(self):
        if not (0.0 <= self.t_start < self.t_end):
            raise ValidationError("window", f"need 0 <= t_start < t_end, got {self.t_start}, {self.t_end}")

    def __iter__(self):
        return iter((self.t_start, self.t_end))


FAST_WINDOW = FitWindow(0.1, 1.0)
SLOW_WINDOW = FitWindow(6.0, 15.0)


@dataclass(frozen=True, eq=False)
class ExpFit:
    """A * exp(-rate * t) + background; covariance ordered (amplitude, rate, background)."""

    rate: float
    amplitude: float
    background: float
    covariance: np.ndarray
    rate_stderr: float
    window: FitWindow = FAST_WINDOW
    fit_background: bool = False
    weighted: bool = True

    def model(self, t):
        return self.amplitude * np.exp(-self.rate * np.asarray(t)) + self.background

    def to_dict(self):
        return {
            "rate": self.rate,
            "rate_stderr": self.rate_stderr,
            "amplitude": self.amplitude,
            "background": self.background,
            "covariance": self.covariance.tolist(),
            "window": [self.window.t_start, self.window.t_end],
            "fit_background": self.fit_background,
            "weighted": self.weighted,
        }


@dataclass(frozen=True, eq=False)
class ResidualReport:
    normalized_residuals: np.ndarray
    chi2_reduced: float
    dof: int
    excluded_bins: int = 0


def _window_data(curve, window):
    mask = window_mask(curve.time_grid, window)
    t = np.asarray(curve.time_grid)[mask]
    y = np.asarray(curve.mean_intensity)[mask]
    s = np.asarray(curve.std_error)[mask]
    return t, y, s


def _loglinear_start(t, y, s):
    w = y / s if np.all(s > 0) else np.ones_like(y)
    slope, intercept = np.polyfit(t - t[0], np.log(y), 1, w=w)
    return float(np.exp(intercept)), max(float(-slope), 1e-3)


def fit_exponential(curve, window=FAST_WINDOW, fit_background=False, max_nfev=5000):
    window = window if isinstance(window, FitWindow) else FitWindow(*window)
    t, y, s = _window_data(curve, window)
    if t.size < MIN_BINS:
        raise ValidationError("window", f"{t.size} bins inside {tuple(window)}, need >= {MIN_BINS}")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValidationError("mean_intensity", "curve must be positive inside the fit window")
    weighted = bool(np.all(s > 0))
    sigma = s if weighted else None
    t0 = t[0]
    a0, g0 = _loglinear_start(t, y, s)

    # amplitude is referred to the window start for conditioning, converted below
    if fit_background:
        def f(tt, a, g, b):
            return a * np.exp(-g * (tt - t0)) + b
        p0 = [a0, g0, 0.01 * float(y.min())]
        bounds = ([-np.inf, 0.0, 0.0], [np.inf, np.inf, np.inf])
    else:
        def f(tt, a, g):
            return a * np.exp(-g * (tt - t0))
        p0 = [a0, g0]
        bounds = ([-np.inf, 0.0], [np.inf, np.inf])
    try:
        popt, pcov = curve_fit(
            f, t, y, p0=p0, sigma=sigma, absolute_sigma=weighted, bounds=bounds,
            method="trf", max_nfev=max_nfev, ftol=1e-14, xtol=1e-14, gtol=1e-14,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"fit over {tuple(window)} failed: {exc}") from exc
    # a rate pinned to its zero bound means the data do not decay
    if not np.all(np.isfinite(popt)) or popt[1] <= RATE_FLOOR:
        raise FitError(f"fit over {tuple(window)} gave unphysical parameters {popt}")

    a_ref, rate = popt[0], popt[1]
    amp = a_ref * np.exp(rate * t0)
    # Jacobian of (amplitude at t=0, rate[, background]) w.r.t. fitted parameters
    k = len(popt)
    jac = np.eye(k)
    jac[0, 0] = np.exp(rate * t0)
    jac[0, 1] = amp * t0
    cov_k = jac @ pcov @ jac.T
    cov = np.zeros((3, 3))
    cov[:k, :k] = cov_k
    background = float(popt[2]) if fit_background else 0.0
    return ExpFit(float(rate), float(amp), background, cov, float(np.sqrt(max(cov[1, 1], 0.0))),
                  window, fit_background, weighted)


def residual_report(curve, fit, window=None):
    window = fit.window if window is None else window
    window = window if isinstance(window, FitWindow) else FitWindow(*window)
    t, y, s = _window_data(curve, window)
    use = s > 0
    res = np.zeros_like(y)
    res[use] = (y[use] - fit.model(t[use])) / s[use]
    n_par = 3 if fit.fit_background else 2
    dof = int(use.sum()) - n_par
    chi2 = float(np.sum(res[use] ** 2) / dof) if dof > 0 else float("nan")
    return ResidualReport(res, chi2, dof, int((~use).sum()))


def od_to_atoms(od, mode):
    if od < 0:
        raise ValidationError("od", "must be >= 0")
    return mode.n_eff * od / mode.gamma_1d_ratio


def atoms_to_od(n_atoms, mode):
    return n_atoms * mode.gamma_1d_ratio / mode.n_eff


# -- sweeps and comparisons -----------------------------------------------------------

@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    covariance: float
    chi2_reduced: float = float("nan")

    @property
    def birge_ratio(self):
        """sqrt(chi2_reduced) when above 1: inflation for a line that misfits its errors."""
        if not np.isfinite(self.chi2_reduced):
            return 1.0
        return float(max(1.0, np.sqrt(self.chi2_reduced)))

    def predict(self, x, scaled=False):
        """(value, 1-sigma) of the line at x; ``scaled`` applies the Birge ratio."""
        value = self.intercept + self.slope * x
        var = self.intercept_stderr**2 + x * x * self.slope_stderr**2 + 2 * x * self.covariance
        err = float(np.sqrt(max(var, 0.0)))
        return value, err * self.birge_ratio if scaled else err


def weighted_line(x, y, sigma):
    """Weighted least-squares line with weights 1/sigma^2 (absolute errors)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    w = 1.0 / np.maximum(np.asarray(sigma, float), STDERR_FLOOR) ** 2
    if x.size < 2:
        return LineFit(float("nan"), float(y[0]) if y.size else float("nan"),
                       float("nan"), float("nan"), float("nan"))
    s, sx, sy = w.sum(), (w * x).sum(), (w * y).sum()
    sxx, sxy = (w * x * x).sum(), (w * x * y).sum()
    delta = s * sxx - sx * sx
    slope = (s * sxy - sx * sy) / delta
    intercept = (sxx * sy - sx * sxy) / delta
    dof = x.size - 2
    chi2 = float((w * (y - intercept - slope * x) ** 2).sum() / dof) if dof > 0 else float("nan")
    return LineFit(float(slope), float(intercept), float(np.sqrt(s / delta)),
                   float(np.sqrt(sxx / delta)), float(-sx / delta), chi2)


@dataclass(frozen=True, eq=False)
class SweepResult:
    n_atoms: np.ndarray
    od_equivalent: np.ndarray
    rates: np.ndarray
    rate_stderr: np.ndarray
    line: LineFit
    fits: tuple = ()


def with_atoms(spec, n_atoms):
    return spec.with_(cloud=replace(spec.cloud, n_atoms=int(n_atoms)), stream_key=int(n_atoms))


def sweep_rate_vs_n(base_spec, n_values, window=FAST_WINDOW, workers=1, fit_background=False,
                    progress=None):
    n_values = sorted(int(n) for n in n_values)
    if not n_values:
        raise ValidationError("n_values", "at least one atom number required")
    if n_values[0] < 1:
        raise ValidationError("n_values", "atom numbers must be positive")
    if not isinstance(base_spec.cloud, CloudSpec):
        raise ValidationError("cloud", "sweeps need a random cloud, not a fixed configuration")
    fits = []
    for n in n_values:
        curve = run_ensemble(with_atoms(base_spec, n), workers=workers)
        fits.append(fit_exponential(curve, window, fit_background))
        if progress is not None:
            progress(n, fits[-1])
    n_arr = np.array(n_values)
    rates = np.array([f.rate for f in fits])
    errs = np.array([f.rate_stderr for f in fits])
    od = np.array([atoms_to_od(n, base_spec.mode) for n in n_values])
    return SweepResult(n_arr, od, rates, errs, weighted_line(n_arr, rates, errs), tuple(fits))


@dataclass(frozen=True)
class SplitComparison:
    rate_single: float
    rate_split: float
    difference: float
    combined_stderr: float
    stderr_single: float
    stderr_split: float

    def to_dict(self):
        return dict(self.__dict__)


def make_split_spec(single_spec, separation, partition="weighted", fwhm_z=None):
    """Two equal-weight clouds centered +-separation/2 about the single cloud's center."""
    if separation < 0:
        raise ValidationError("separation", "must be >= 0")
    base = single_spec.cloud.components[0]
    cloud = CloudSpec.split(
        separation, base.fwhm_z if fwhm_z is None else fwhm_z, single_spec.cloud.n_atoms,
        base.center_z, partition, single_spec.cloud.r_fixed,
    )
    return single_spec.with_(cloud=cloud)


def split_compare(single_spec, split_spec, window=FAST_WINDOW, workers=1, precomputed=None):
    """Fast-rate difference split minus single; ``precomputed`` = (single, split) curves."""
    for name in ("n_atoms", "realizations"):
        if getattr(single_spec, name) != getattr(split_spec, name):
            raise ValidationError(name, "single and split runs must match")
    if single_spec.mode != split_spec.mode or single_spec.kernels != split_spec.kernels:
        raise ValidationError("mode", "single and split runs must share mode and kernels")
    if precomputed is None:
        precomputed = (run_ensemble(single_spec, workers=workers),
                       run_ensemble(split_spec, workers=workers))
    a = fit_exponential(precomputed[0], window)
    b = fit_exponential(precomputed[1], window)
    comb = float(np.hypot(a.rate_stderr, b.rate_stderr))
    return SplitComparison(a.rate, b.rate, b.rate - a.rate, comb, a.rate_stderr, b.rate_stderr)
