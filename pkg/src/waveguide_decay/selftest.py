"""Closed-form and oracle checks runnable from the command line."""
import numpy as np

from .coupling_kernels import KernelOptions, build_coupling_matrix
from .ensemble_sampler import CloudSpec, fixed_config, sample_config, substream
from .excitation_dynamics import (
    decompose,
    evolve,
    guided_signal,
    initial_amplitudes,
    integrate_reference,
)
from .mode_model import make_mode_spec

R0 = 270.0
TIME = np.arange(0, 301) * 0.05
FAULTS = ("flip_sign",)


def _matrix(config, mode, opts, fault):
    cm = build_coupling_matrix(config, mode, opts)
    if fault == "flip_sign" and cm.n_atoms > 1:
        entries = cm.entries.copy()
        entries[0, 1] = -entries[0, 1]
        cm = type(cm)(entries, cm.gamma_part, cm.omega_part)
    return cm


def _trace(config, mode, opts, fault=None):
    cm = _matrix(config, mode, opts, fault)
    b0 = initial_amplitudes(config, (1.0, 0.0, 0.0), mode)
    return guided_signal(evolve(decompose(cm, b0), TIME), config, mode, TIME).intensity


def _random_configs(count, fwhm, seed):
    for k in range(count):
        stream = substream(seed, k)
        n = 2 + k % 5
        yield sample_config(CloudSpec.single(0.0, fwhm, n), stream)


def check_single_atom(mode, fault):
    cfg = fixed_config([(R0, 0.0, 0.0)])
    err = np.abs(_trace(cfg, mode, KernelOptions(), fault) - np.exp(-TIME)).max()
    return err < 1e-12, f"max |I - exp(-t)| = {err:.1e}"


def check_dicke_pair(mode, fault):
    cfg = fixed_config([(R0, 0.0, 0.0), (R0, 0.0, 0.0)])
    err = np.abs(_trace(cfg, mode, KernelOptions(), fault) - np.exp(-2 * TIME)).max()
    return err < 1e-12, f"max |I - exp(-2t)| = {err:.1e}"


def check_symmetry(mode, fault):
    worst = 0.0
    for cfg in _random_configs(50, 2000.0, 11):
        cm = _matrix(cfg, mode, KernelOptions(), fault)
        worst = max(worst, float(np.abs(cm.entries - cm.entries.T).max()))
    return worst == 0.0, f"max |Gamma - Gamma^T| = {worst:.1e}"


def check_eigen_vs_ode(mode, fault):
    worst = 0.0
    for cfg in _random_configs(20, 2000.0, 12):
        cm = _matrix(cfg, mode, KernelOptions(), fault)
        b0 = initial_amplitudes(cfg, (1.0, 0.0, 0.0), mode)
        a = np.abs(evolve(decompose(cm, b0), TIME)) ** 2
        b = np.abs(integrate_reference(cm, b0, TIME)) ** 2
        worst = max(worst, float((np.abs(a - b) / (b + 1e-12)).max()))
    return worst < 1e-6, f"max relative deviation = {worst:.1e}"


def check_psd(mode, fault):
    worst = np.inf
    for variant in ("full_free_space", "sinc_caption", "disabled"):
        for cfg in _random_configs(50, 2000.0, 13):
            cm = _matrix(cfg, mode, KernelOptions(variant), fault)
            herm = cm.entries + cm.entries.conj().T
            worst = min(worst, float(np.linalg.eigvalsh(herm).min()))
    return worst >= -1e-10, f"min eigenvalue of Gamma + Gamma^dagger = {worst:.3e}"


def check_periodicity(mode, fault):
    cfg = sample_config(CloudSpec.split(318e3, 100e3, 6, partition="fixed"), substream(14, 0))
    opts = KernelOptions("disabled")
    moved = cfg.translate_periods(cfg.labels == 1, 408, mode)
    a = _matrix(cfg, mode, opts, fault).entries
    b = _matrix(moved, mode, opts, fault).entries
    same = np.array_equal(a, b)
    return same, "bit-identical" if same else f"max diff {np.abs(a - b).max():.1e}"


CHECKS = (
    ("single_atom", check_single_atom),
    ("dicke_pair", check_dicke_pair),
    ("symmetry", check_symmetry),
    ("eigen_vs_ode", check_eigen_vs_ode),
    ("psd", check_psd),
    ("periodicity", check_periodicity),
)


def run_selftest(fault=None, emit=print):
    """Run every check; returns True when all pass."""
    mode = make_mode_spec()
    ok = True
    for name, check in CHECKS:
        passed, detail = check(mode, fault)
        ok &= bool(passed)
        emit(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return ok
