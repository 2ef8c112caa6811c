"""Emitter configurations around the fiber: random clouds and fixed placements."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .mode_model import FIBER_RADIUS_NM, SURFACE_STANDOFF_NM

R_FIXED_NM = FIBER_RADIUS_NM + SURFACE_STANDOFF_NM
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
TWO_PI = 2.0 * math.pi
PARTITIONS = ("weighted", "fixed")


@dataclass(frozen=True)
class AtomPosition:
    r: float
    phi: float
    z: float

    def __post_init__(self):
        if not self.r > FIBER_RADIUS_NM:
            raise ValidationError("r", f"must exceed the fiber radius {FIBER_RADIUS_NM} nm")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)


@dataclass(frozen=True)
class CloudComponent:
    center_z: float
    fwhm_z: float
    weight: float = 1.0


@dataclass(frozen=True)
class CloudSpec:
    """Gaussian mixture along the fiber at a fixed radial distance.

    ``partition`` chooses how atoms are shared between components: "weighted"
    draws each atom's component independently (binomial counts), "fixed"
    assigns ``round(weight * n_atoms)`` atoms to each by largest remainder.
    """

    components: tuple
    r_fixed: float = R_FIXED_NM
    n_atoms: int = 7
    partition: str = "weighted"

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, CloudComponent) else CloudComponent(*c) for c in self.components
        )
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValidationError("components", "at least one component required")
        for c in comps:
            if not c.fwhm_z > 0:
                raise ValidationError("fwhm_z", f"must be > 0, got {c.fwhm_z!r}")
            if not c.weight > 0:
                raise ValidationError("weight", f"must be > 0, got {c.weight!r}")
        if abs(math.fsum(c.weight for c in comps) - 1.0) > 1e-9:
            raise ValidationError("weight", "component weights must sum to 1")
        if not self.r_fixed > FIBER_RADIUS_NM:
            raise ValidationError("r_fixed", f"must exceed the fiber radius {FIBER_RADIUS_NM} nm")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValidationError("n_atoms", f"must be a positive integer, got {self.n_atoms!r}")
        if self.partition not in PARTITIONS:
            raise ValidationError("partition", f"must be one of {PARTITIONS}")

    @classmethod
    def single(cls, center_z=0.0, fwhm_z=200e3, n_atoms=7, r_fixed=R_FIXED_NM):
        return cls((CloudComponent(center_z, fwhm_z, 1.0),), r_fixed, n_atoms)

    @classmethod
    def split(cls, separation, fwhm_z, n_atoms, center_z=0.0, partition="weighted",
              r_fixed=R_FIXED_NM):
        half = 0.5 * separation
        return cls(
            (CloudComponent(center_z - half, fwhm_z, 0.5), CloudComponent(center_z + half, fwhm_z, 0.5)),
            r_fixed, n_atoms, partition,
        )

    def to_dict(self):
        return {
            "components": [
                {"center_z": c.center_z, "fwhm_z": c.fwhm_z, "weight": c.weight}
                for c in self.components
            ],
            "r_fixed": self.r_fixed,
            "n_atoms": self.n_atoms,
            "partition": self.partition,
        }


@dataclass(frozen=True, eq=False)
class AtomConfig:
    """N emitters sharing one radius.

    ``z`` is the base axial coordinate (nm). ``period_shift`` counts whole
    guided periods added on top of it, so that lattice translations stay exact
    in floating point; ``z_total`` is the physical coordinate.
    """

    r: float
    phi: np.ndarray
    z: np.ndarray
    period_shift: np.ndarray = None
    period: float = 0.0
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float) % TWO_PI
        z = np.asarray(self.z, dtype=float)
        if phi.ndim != 1 or phi.shape != z.shape or phi.size < 1:
            raise ValidationError("positions", "need matching nonempty phi and z vectors")
        shift = (np.zeros(z.shape, dtype=np.int64) if self.period_shift is None
                 else np.asarray(self.period_shift, dtype=np.int64))
        labels = (np.zeros(z.shape, dtype=np.int64) if self.labels is None
                  else np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "period_shift", shift)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "r", float(self.r))

    @property
    def n_atoms(self):
        return self.z.size

    @property
    def z_total(self):
        if not self.period_shift.any():
            return self.z
        return self.z + self.period_shift * self.period

    @property
    def positions(self):
        return [AtomPosition(self.r, p, z) for p, z in zip(self.phi, self.z_total)]

    def cartesian(self):
        """(N, 3) array of x, y, z in nm."""
        return np.column_stack(
            (self.r * np.cos(self.phi), self.r * np.sin(self.phi), self.z_total)
        )

    def translate_periods(self, mask, m, mode):
        """Shift the atoms selected by ``mask`` by ``m`` whole guided periods."""
        if self.period_shift.any() and self.period != mode.guided_period:
            raise ValidationError("period", "config already shifted with a different mode")
        shift = self.period_shift + np.where(np.asarray(mask, dtype=bool), int(m), 0)
        return AtomConfig(self.r, self.phi, self.z, shift, mode.guided_period, self.labels)


def fixed_config(positions):
    positions = list(positions)
    if not positions:
        raise ValidationError("positions", "at least one position required")
    positions = [p if isinstance(p, AtomPosition) else AtomPosition(*p) for p in positions]
    radii = {p.r for p in positions}
    if len(radii) != 1:
        raise ValidationError("r", f"all radii must be equal, got {sorted(radii)}")
    return AtomConfig(
        positions[0].r, [p.phi for p in positions], [p.z for p in positions]
    )


def load_positions_csv(path):
    """Read a fixed configuration from a CSV with columns r_nm, phi_rad, z_nm."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"r_nm", "phi_rad", "z_nm"} - set(reader.fieldnames or ())
        if missing:
            raise ValidationError("positions_file", f"missing columns {sorted(missing)}")
        rows = [(float(r["r_nm"]), float(r["phi_rad"]), float(r["z_nm"])) for r in reader]
    return fixed_config(rows)


def substream(master_seed, index, stream_key=0):
    """Independent generator for realization ``index``.

    Philox is counter-based: the realization index occupies a high counter
    word, so substreams never overlap and can be drawn in any order.
    """
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, stream_key & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    counter = np.array([0, 0, index, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _fixed_counts(weights, n):
    raw = np.asarray(weights) * n
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[: n - counts.sum()]] += 1
    return counts


def sample_config(spec, stream):
    n = spec.n_atoms
    # fixed draw order (normals, azimuths, component picks) regardless of the
    # mixture, so identical components reproduce a single cloud bit for bit
    normals = stream.standard_normal(n)
    phi = stream.random(n) * TWO_PI
    picks = stream.random(n)
    weights = np.array([c.weight for c in spec.components])
    if spec.partition == "fixed":
        labels = np.repeat(np.arange(len(weights)), _fixed_counts(weights, n))
    else:
        edges = np.cumsum(weights)
        labels = np.minimum(np.searchsorted(edges, picks, side="right"), len(weights) - 1)
    centers = np.array([c.center_z for c in spec.components])[labels]
    sigmas = np.array([c.fwhm_z for c in spec.components])[labels] * FWHM_TO_SIGMA
    return AtomConfig(spec.r_fixed, phi, centers + sigmas * normals, labels=labels)


def draw(cloud, stream):
    """Configuration for one realization; a fixed AtomConfig is returned as is."""
    if isinstance(cloud, AtomConfig):
        return cloud
    return sample_config(cloud, stream)
