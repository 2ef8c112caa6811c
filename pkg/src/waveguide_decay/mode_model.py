"""Calibrated guided-mode parameters shared by every kernel.

Rates are in units of the single-atom decay rate gamma_0, times in units of
tau_0 = 1/gamma_0 and lengths in nm.
"""
import math
from dataclasses import dataclass, field

from .errors import ValidationError

WAVELENGTH_NM = 780.0
N_EFF = 1.15
GAMMA_1D_RATIO = 0.13
TAU0_NS = 26.24
FIBER_RADIUS_NM = 240.0
SURFACE_STANDOFF_NM = 30.0


@dataclass(frozen=True)
class ModeSpec:
    wavelength: float
    n_eff: float
    gamma_1d_ratio: float
    beta0: float = field(init=False)
    k0: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise ValidationError("wavelength", f"must be > 0, got {self.wavelength!r}")
        if not (1.0 <= self.n_eff < 2.0):
            # n_eff = 1 is admitted as the free-space reduction (beta0 == k0)
            raise ValidationError("n_eff", f"must lie in [1, 2), got {self.n_eff!r}")
        if not (0.0 < self.gamma_1d_ratio < 1.0):
            raise ValidationError(
                "gamma_1d_ratio", f"must lie in (0, 1), got {self.gamma_1d_ratio!r}"
            )
        object.__setattr__(self, "beta0", self.n_eff * 2.0 * math.pi / self.wavelength)
        object.__setattr__(self, "k0", 2.0 * math.pi / self.wavelength)

    @property
    def guided_period(self):
        """Spatial period of the guided-mode phase, wavelength / n_eff (nm)."""
        return self.wavelength / self.n_eff

    @property
    def gamma_rad_ratio(self):
        """Fraction of the single-atom decay emitted outside the guide."""
        return 1.0 - self.gamma_1d_ratio

    def to_dict(self):
        return {
            "wavelength": self.wavelength,
            "n_eff": self.n_eff,
            "gamma_1d_ratio": self.gamma_1d_ratio,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["wavelength"]), float(d["n_eff"]), float(d["gamma_1d_ratio"]))


def make_mode_spec(wavelength=WAVELENGTH_NM, n_eff=N_EFF, gamma_1d_ratio=GAMMA_1D_RATIO):
    return ModeSpec(float(wavelength), float(n_eff), float(gamma_1d_ratio))
