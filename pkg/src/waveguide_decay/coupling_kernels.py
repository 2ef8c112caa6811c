"""Pairwise guided and radiated couplings and the complex symmetric matrix Gamma.

All dipoles point along the fiber axis (z). The radiated channel uses
free-space kernels scaled to gamma_r = 1 - gamma_1d_ratio, so that the
zero-separation value of guided + radiated is exactly 1 (gamma_ii = gamma_0).

Guided dispersive coupling depends on |z_i - z_j| so that Gamma stays
symmetric (reciprocity). Guided phases are evaluated from the base axial
coordinate with whole-period offsets removed analytically; translating atoms
by whole guided periods therefore leaves the guided terms bit-identical as
long as the axial ordering of the atoms is unchanged.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

RADIATED_VARIANTS = ("full_free_space", "sinc_caption", "disabled")
_SERIES_X = 0.1


@dataclass(frozen=True)
class KernelOptions:
    radiated_variant: str = "full_free_space"
    guided_enabled: bool = True
    near_field_cutoff: float = 10.0

    def __post_init__(self):
        if self.radiated_variant not in RADIATED_VARIANTS:
            raise ValidationError(
                "radiated_variant", f"must be one of {RADIATED_VARIANTS}, got {self.radiated_variant!r}"
            )
        if not self.near_field_cutoff > 0:
            raise ValidationError("near_field_cutoff", "must be > 0")

    def to_dict(self):
        return {
            "radiated_variant": self.radiated_variant,
            "guided_enabled": bool(self.guided_enabled),
            "near_field_cutoff": self.near_field_cutoff,
        }


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    entries: np.ndarray
    gamma_part: np.ndarray
    omega_part: np.ndarray

    @property
    def n_atoms(self):
        return self.entries.shape[-1]


# -- scalar kernels (broadcast over arrays) ---------------------------------

def _sinc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(xs) / xs)


def _near_term(x):
    """cos x / x^2 - sin x / x^3, with its Taylor series near the origin."""
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_X
    x2 = x * x
    series = -1.0 / 3.0 + x2 * (1.0 / 30.0 + x2 * (-1.0 / 840.0 + x2 * (1.0 / 45360.0)))
    xs = np.where(small, 1.0, x)
    direct = np.cos(xs) / xs**2 - np.sin(xs) / xs**3
    return np.where(small, series, direct)


def free_space_gamma(x, u):
    """Dissipative kernel of two z-dipoles, normalized to 1 at x = 0.

    x = k0 R, u = cosine of the angle between the separation and the dipoles.
    """
    u2 = np.asarray(u, dtype=float) ** 2
    return 1.5 * ((1.0 - u2) * _sinc(x) + (1.0 - 3.0 * u2) * _near_term(x))


def free_space_omega(x, u):
    """Dispersive kernel of two z-dipoles (diverges as 1/x^3; x must be > 0)."""
    x = np.asarray(x, dtype=float)
    u2 = np.asarray(u, dtype=float) ** 2
    c, s = np.cos(x), np.sin(x)
    return 0.75 * (-(1.0 - u2) * c / x + (1.0 - 3.0 * u2) * (s / x**2 + c / x**3))


def _guided_terms(cos_dphi, dz_base, dz_total, mode):
    phase = mode.beta0 * dz_base
    g = mode.gamma_1d_ratio * cos_dphi
    gamma = g * np.cos(phase)
    omega = 0.5 * g * np.sign(dz_total) * np.sin(phase)
    return gamma, omega


def _radiated_terms(sep, dz_total, mode, opts):
    """Radiated (gamma, omega) for separation ``sep`` and axial offset ``dz_total``."""
    gr = mode.gamma_rad_ratio
    variant = opts.radiated_variant
    zero = np.zeros(np.shape(sep))
    if variant == "disabled":
        return zero, zero
    if variant == "sinc_caption":
        return gr * _sinc(mode.k0 * np.abs(dz_total)), zero
    pos = sep > 0
    safe = np.where(pos, sep, 1.0)
    u = np.where(pos, dz_total / safe, 0.0)
    gamma = gr * np.where(pos, free_space_gamma(mode.k0 * sep, u), 1.0)
    xc = mode.k0 * np.maximum(safe, opts.near_field_cutoff)
    # coincident atoms have no separation direction: dispersive term set to 0
    omega = gr * np.where(pos, free_space_omega(xc, u), 0.0)
    return gamma, omega


def _geometry(r, phi_a, z_a, shift_a, phi_b, z_b, shift_b, period):
    dphi = phi_a - phi_b
    dz_base = z_a - z_b
    dz_total = dz_base + (shift_a - shift_b) * period if period else dz_base
    chord = 2.0 * r * np.abs(np.sin(0.5 * dphi))
    sep = np.sqrt(chord * chord + dz_total * dz_total)
    return np.cos(dphi), dz_base, dz_total, sep


# -- pairwise API ------------------------------------------------------------

def _pair(a, b):
    if a.r != b.r:
        raise ValidationError("r", "both atoms must share the fixed radius")
    return _geometry(a.r, a.phi, a.z, 0, b.phi, b.z, 0, 0.0)


def gamma_guided(a, b, mode):
    cos_dphi, dz_base, dz_total, _ = _pair(a, b)
    return float(_guided_terms(cos_dphi, dz_base, dz_total, mode)[0])


def omega_guided(a, b, mode):
    cos_dphi, dz_base, dz_total, _ = _pair(a, b)
    return float(_guided_terms(cos_dphi, dz_base, dz_total, mode)[1])


def gamma_radiated(a, b, mode, opts=KernelOptions()):
    _, _, dz_total, sep = _pair(a, b)
    return float(_radiated_terms(sep, dz_total, mode, opts)[0])


def omega_radiated(a, b, mode, opts=KernelOptions()):
    _, _, dz_total, sep = _pair(a, b)
    return float(_radiated_terms(sep, dz_total, mode, opts)[1])


# -- matrix assembly -----------------------------------------------------------

def _symmetrize(m):
    upper = np.triu(m, 1)
    return upper + np.swapaxes(upper, -1, -2)


def coupling_parts(r, phi, z, shift, period, mode, opts):
    """Batched (gamma, omega) for arrays phi, z, shift of shape (..., N).

    Computed from the strict upper triangle and mirrored, so every matrix is
    symmetric to the last bit; the diagonal is gamma_ii = 1, omega_ii = 0.
    """
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float)
    shift = np.asarray(shift)
    cos_dphi, dz_base, dz_total, sep = _geometry(
        r,
        phi[..., :, None], z[..., :, None], shift[..., :, None],
        phi[..., None, :], z[..., None, :], shift[..., None, :],
        period,
    )
    gamma_rad, omega_rad = _radiated_terms(sep, dz_total, mode, opts)
    if opts.guided_enabled:
        gamma_1d, omega_1d = _guided_terms(cos_dphi, dz_base, dz_total, mode)
        gamma = gamma_1d + gamma_rad
        omega = omega_1d + omega_rad
    else:
        gamma, omega = gamma_rad, omega_rad
    n = phi.shape[-1]
    gamma = _symmetrize(gamma) + np.eye(n)
    omega = _symmetrize(omega)
    return gamma, omega


def build_coupling_matrix(config, mode, opts=KernelOptions()):
    gamma, omega = coupling_parts(
        config.r, config.phi, config.z, config.period_shift, config.period, mode, opts
    )
    return CouplingMatrix(0.5 * (gamma + 1j * omega), gamma, omega)
