import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waveguide_decay import (
    AveragedDecay,
    CloudSpec,
    FitWindow,
    KernelOptions,
    RunSpec,
    ValidationError,
    fit_exponential,
    od_to_atoms,
    residual_report,
    split_compare,
    sweep_rate_vs_n,
)
from waveguide_decay.decay_analysis import atoms_to_od, make_split_spec, weighted_line
from waveguide_decay.errors import FitError

T = np.arange(0, 401) * 0.05


def curve(y, s=None):
    return AveragedDecay(T, np.asarray(y, float), np.zeros_like(T) if s is None else np.asarray(s))


def test_round_trip_rate():
    fit = fit_exponential(curve(np.exp(-1.10 * T)), (0.1, 1.0))
    assert fit.rate == pytest.approx(1.10, abs=1e-10)
    assert not fit.weighted and fit.background == 0.0


@settings(max_examples=40, deadline=None)
@given(rate=st.floats(0.05, 3.0), amp=st.floats(0.1, 10.0), bg=st.floats(0.0, 0.05),
       start=st.sampled_from([0.0, 0.5, 2.0]))
def test_noiseless_recovery(rate, amp, bg, start):
    y = amp * np.exp(-rate * T) + bg
    window = FitWindow(start, start + 10.0)
    fit = fit_exponential(curve(y), window, fit_background=True)
    assert fit.rate == pytest.approx(rate, rel=5e-5)
    assert fit.amplitude == pytest.approx(amp, rel=5e-5)
    assert fit.background == pytest.approx(bg, rel=5e-4, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(1e-3, 1e3))
def test_rate_invariant_under_scaling(scale):
    y = np.exp(-0.8 * T) + 0.3 * np.exp(-0.2 * T)
    a = fit_exponential(curve(y), (0.1, 1.0))
    b = fit_exponential(curve(scale * y), (0.1, 1.0))
    assert b.rate == pytest.approx(a.rate, rel=1e-8)


def test_weighted_errors_follow_sigma():
    rng = np.random.default_rng(0)
    sigma = np.full_like(T, 1e-3)
    y = np.exp(-1.1 * T) + rng.normal(0, 1e-3, T.size)
    fit = fit_exponential(curve(y, sigma), (0.1, 1.0))
    assert fit.weighted and fit.rate_stderr > 0
    assert abs(fit.rate - 1.1) < 5 * fit.rate_stderr
    assert fit.covariance.shape == (3, 3) and fit.covariance[2, 2] == 0.0


def test_window_too_short():
    with pytest.raises(ValidationError):
        fit_exponential(curve(np.exp(-T)), (0.1, 0.25))


def test_negative_curve_rejected():
    y = np.exp(-T) - 0.5
    with pytest.raises(ValidationError):
        fit_exponential(curve(y), (0.1, 2.0))


def test_growing_curve_is_fit_error():
    with pytest.raises(FitError):
        fit_exponential(curve(np.exp(0.3 * T)), (0.1, 2.0))


def test_window_validation():
    with pytest.raises(ValidationError):
        FitWindow(1.0, 1.0)
    with pytest.raises(ValidationError):
        FitWindow(-0.1, 1.0)


def test_residuals_zero_for_exact_model():
    y = 2.0 * np.exp(-0.7 * T)
    s = np.full_like(T, 1e-3)
    fit = fit_exponential(curve(y, s), (0.1, 5.0))
    rep = residual_report(curve(y, s), fit)
    assert np.abs(rep.normalized_residuals).max() < 1e-6 and rep.chi2_reduced < 1e-10


def test_chi2_near_one_for_unit_noise():
    t = np.arange(0, 2001) * 0.005
    rng = np.random.default_rng(5)
    s = np.full_like(t, 1e-3)
    y = np.exp(-t) + rng.normal(0, 1e-3, t.size)
    c = AveragedDecay(t, y, s)
    fit = fit_exponential(c, (0.1, 2.0))
    rep = residual_report(c, fit)
    assert rep.dof >= 100 and rep.chi2_reduced == pytest.approx(1.0, abs=0.2)


def test_zero_error_bins_excluded():
    y = np.exp(-T)
    s = np.full_like(T, 1e-3)
    s[5:8] = 0.0
    fit = fit_exponential(curve(y, s), (0.1, 1.0))
    rep = residual_report(curve(y, s), fit)
    assert rep.excluded_bins == 3 and rep.dof == 19 - 3 - 2


def test_od_conversion(mode):
    assert od_to_atoms(0.0, mode) == 0.0
    assert od_to_atoms(0.66, mode) == pytest.approx(5.84, abs=0.01)
    assert od_to_atoms(0.13 / 1.15, mode) == pytest.approx(1.0)
    assert atoms_to_od(od_to_atoms(0.4, mode), mode) == pytest.approx(0.4)
    with pytest.raises(ValidationError):
        od_to_atoms(-1.0, mode)


@given(a=st.floats(0, 100), x=st.floats(0, 10))
def test_od_linear(mode, a, x):
    assert od_to_atoms(a * x, mode) == pytest.approx(a * od_to_atoms(x, mode), rel=1e-12, abs=1e-300)


def test_weighted_line_closed_form():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    y = 0.5 + 0.25 * x
    line = weighted_line(x, y, np.full(4, 0.1))
    assert line.slope == pytest.approx(0.25) and line.intercept == pytest.approx(0.5)
    coef, cov = np.polyfit(x, y + np.array([0.01, -0.02, 0.015, 0.0]), 1, w=np.full(4, 10.0),
                           cov="unscaled")
    other = weighted_line(x, y + np.array([0.01, -0.02, 0.015, 0.0]), np.full(4, 0.1))
    assert other.slope == pytest.approx(coef[0]) and other.slope_stderr == pytest.approx(np.sqrt(cov[0, 0]))


def _base(mode, realizations=512, kernels=KernelOptions()):
    return RunSpec(CloudSpec.single(0.0, 200e3, 3), mode, kernels, realizations=realizations,
                   master_seed=11)


def test_sweep_single_point(mode):
    res = sweep_rate_vs_n(_base(mode), [1])
    assert res.rates[0] == pytest.approx(1.0, abs=1e-9)


def test_sweep_order_invariant(mode):
    a = sweep_rate_vs_n(_base(mode, 256), [3, 1, 2])
    b = sweep_rate_vs_n(_base(mode, 256), [1, 2, 3])
    assert a.line.slope == b.line.slope and list(a.n_atoms) == [1, 2, 3]


def test_sweep_rejects_nonpositive(mode):
    with pytest.raises(ValidationError):
        sweep_rate_vs_n(_base(mode), [0, 1])
    with pytest.raises(ValidationError):
        sweep_rate_vs_n(_base(mode), [])


def test_sweep_without_couplings_is_flat(mode):
    base = _base(mode, 64, KernelOptions("disabled", guided_enabled=False))
    res = sweep_rate_vs_n(base, [1, 2, 4])
    assert np.allclose(res.rates, 1.0, atol=1e-9)
    assert abs(res.line.slope) < 1e-9


def test_split_zero_separation_identical(mode):
    single = _base(mode, 300)
    comp = split_compare(single, make_split_spec(single, 0.0))
    assert comp.difference == 0.0


def test_split_guided_periodic_statistically_identical(mode):
    kernels = KernelOptions("disabled")
    single = RunSpec(CloudSpec.single(0.0, 200e3, 4), mode, kernels, realizations=2000,
                     master_seed=3)
    sep = 470 * mode.guided_period
    split = make_split_spec(single, sep, "fixed")
    comp = split_compare(single, split)
    assert abs(comp.difference) < 3 * comp.combined_stderr


def test_split_requires_matching_specs(mode):
    a = _base(mode, 100)
    with pytest.raises(ValidationError):
        split_compare(a, a.with_(realizations=200))
    with pytest.raises(ValidationError):
        make_split_spec(a, -1.0)


def test_line_chi2_and_birge_ratio():
    x = np.arange(1.0, 7.0)
    noise = np.array([0.0, 0.02, -0.02, 0.02, -0.02, 0.02])
    line = weighted_line(x, 1 + 0.1 * x + noise, np.full(6, 0.01))
    assert line.chi2_reduced > 1 and line.birge_ratio == pytest.approx(np.sqrt(line.chi2_reduced))
    v, e = line.predict(7.0)
    assert line.predict(7.0, scaled=True) == (v, pytest.approx(e * line.birge_ratio))
    exact = weighted_line(x, 1 + 0.1 * x, np.full(6, 0.01))
    assert exact.birge_ratio == 1.0
