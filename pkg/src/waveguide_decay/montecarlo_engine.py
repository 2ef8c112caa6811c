"""Ensemble averaging of the guided signal over random configurations.

Realizations are processed in blocks aligned to absolute realization
indices (block k covers [k*BLOCK, (k+1)*BLOCK)). Each block is reduced with a
fixed numpy summation and block sums are combined with ``math.fsum``, which
is exact and order-independent, so results are bit-identical for any number
of workers and accumulators over consecutive block-aligned ranges merge
exactly.

Two averaging conventions are offered:

* ``"ensemble"`` (default): average the raw guided intensity |d(t)|^2 and
  normalize the mean curve at t = 0. Bright (super-radiant) realizations weigh
  more, as photon counts do in a detector.
* ``"per_trace"``: normalize each trace to 1 at t = 0 before averaging.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .coupling_kernels import KernelOptions, build_coupling_matrix, coupling_parts
from .ensemble_sampler import draw, substream
from .errors import EmptyEnsembleError, ValidationError
from .excitation_dynamics import (
    COND_LIMIT,
    DARK_THRESHOLD,
    detection_weights,
    guided_signal,
    initial_amplitudes,
    integrate_reference,
    propagate,
)

BLOCK = 256
# spreads below this fraction of the mean are floating-point noise, not sampling
RESOLUTION = 1e-12
NORMALIZATIONS = ("ensemble", "per_trace")
DEFAULT_REALIZATIONS = 100_000


def default_time_grid(stop=20.0, step=0.05):
    n = int(round(stop / step))
    return np.arange(n + 1) * step


@dataclass(frozen=True, eq=False)
class RunSpec:
    cloud: object
    mode: object
    kernels: KernelOptions = KernelOptions()
    drive_direction: tuple = (1.0, 0.0, 0.0)
    realizations: int = DEFAULT_REALIZATIONS
    master_seed: int = 0
    time_grid: np.ndarray = None
    normalization: str = "ensemble"
    exclude_dark: bool = True
    both_polarizations: bool = False
    stream_key: int = 0

    def __post_init__(self):
        t = default_time_grid() if self.time_grid is None else np.asarray(self.time_grid, float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValidationError("time_grid", "must be strictly increasing and start at 0")
        object.__setattr__(self, "time_grid", t)
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise ValidationError("realizations", "must be a positive integer")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError("normalization", f"must be one of {NORMALIZATIONS}")
        d = np.asarray(self.drive_direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValidationError("drive_direction", "must be a unit 3-vector")
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed", "must fit in an unsigned 64-bit integer")

    @property
    def n_atoms(self):
        return self.cloud.n_atoms

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class AveragedDecay:
    time_grid: np.ndarray
    mean_intensity: np.ndarray
    std_error: np.ndarray
    n_effective: int = 1
    dark_state_count: int = 0


# -- per-block simulation --------------------------------------------------------

def block_raw_intensity(spec, start, stop):
    """Raw guided intensities |d(t)|^2 for realizations [start, stop), shape (B, T)."""
    mode, t = spec.mode, spec.time_grid
    configs = [draw(spec.cloud, substream(spec.master_seed, k, spec.stream_key))
               for k in range(start, stop)]
    phi = np.stack([c.phi for c in configs])
    z = np.stack([c.z for c in configs])
    shift = np.stack([c.period_shift for c in configs])
    first = configs[0]
    gamma, omega = coupling_parts(first.r, phi, z, shift, first.period, mode, spec.kernels)
    g = 0.5 * (gamma + 1j * omega)
    n = phi.shape[1]

    drive = np.asarray(spec.drive_direction, dtype=float)
    z_total = z + shift * first.period if first.period else z
    proj = first.r * (np.cos(phi) * drive[0] + np.sin(phi) * drive[1]) + z_total * drive[2]
    b0 = np.exp(1j * mode.k0 * proj) / math.sqrt(n)

    w, v = np.linalg.eig(g)
    cond = np.linalg.cond(v)
    bad = ~(np.isfinite(cond) & (cond <= COND_LIMIT))
    if bad.any():
        v = np.where(bad[:, None, None], np.eye(n), v)
    c = np.linalg.solve(v, b0[..., None])[..., 0]
    decay = np.exp(-w[:, :, None] * t[None, None, :])

    def intensity(p):
        u = np.exp(1j * (mode.beta0 * z + p * phi))
        weights = np.einsum("bj,bja->ba", u, v) * c
        return np.abs(np.einsum("ba,bat->bt", weights, decay)) ** 2

    raw = intensity(1)
    if spec.both_polarizations:
        raw = raw + intensity(-1)
    for i in np.flatnonzero(bad):
        cfg = configs[i]
        amps = integrate_reference(g[i], b0[i], t)
        raw[i] = np.abs(detection_weights(cfg, mode) @ amps) ** 2
        if spec.both_polarizations:
            raw[i] += np.abs(detection_weights(cfg, mode, -1) @ amps) ** 2
    return raw


class Accumulator:
    """Exactly mergeable sums of shifted traces y = x - exp(-t).

    Keeps per-block sums of y, y^2 and y * y(0); the shift keeps the
    variance formula free of cancellation near single-atom behaviour.
    """

    def __init__(self, time_grid, blocks=None):
        self.time_grid = np.asarray(time_grid, dtype=float)
        self.ref = np.exp(-self.time_grid)
        self.blocks = list(blocks or [])

    @property
    def count(self):
        return sum(b[0] for b in self.blocks)

    @property
    def dark(self):
        return sum(b[1] for b in self.blocks)

    @staticmethod
    def block_stats(raw, ref, normalization, exclude_dark):
        dark = raw[:, 0] < DARK_THRESHOLD
        if normalization == "per_trace" or exclude_dark:
            raw = raw[~dark]
        x = raw / raw[:, :1] if normalization == "per_trace" else raw
        y = x - ref
        return (x.shape[0], int(dark.sum()), y.sum(axis=0), (y * y).sum(axis=0),
                (y * y[:, :1]).sum(axis=0))

    def merge(self, other):
        return Accumulator(self.time_grid, self.blocks + other.blocks)

    def _exact(self, idx):
        stack = np.stack([b[idx] for b in self.blocks])
        return np.array([math.fsum(col) for col in stack.T])

    def finalize(self, normalization):
        n = self.count
        if n == 0:
            raise EmptyEnsembleError(f"all {self.dark} realizations were dark")
        s1, s2, s10 = self._exact(2), self._exact(3), self._exact(4)
        mean = self.ref + s1 / n
        if n > 1:
            var = (s2 - s1 * s1 / n) / (n - 1)
            cov = (s10 - s1 * s1[0] / n) / (n - 1)
        else:
            var = cov = np.zeros_like(mean)
        if normalization == "ensemble":
            m0 = mean[0]
            if m0 < DARK_THRESHOLD:
                raise EmptyEnsembleError("mean guided intensity vanishes at t = 0")
            ratio = mean / m0
            # delta-method variance of a ratio of means sharing realizations
            var_ratio = var - 2.0 * ratio * cov + ratio * ratio * var[0]
            stderr = np.sqrt(np.maximum(var_ratio, 0.0) / n) / m0
            return AveragedDecay(self.time_grid, ratio, _resolve(stderr, ratio), n, self.dark)
        stderr = np.sqrt(np.maximum(var, 0.0) / n)
        return AveragedDecay(self.time_grid, mean, _resolve(stderr, mean), n, self.dark)


def _resolve(stderr, mean):
    return np.where(stderr <= RESOLUTION * np.abs(mean), 0.0, stderr)


def _block_job(args):
    spec, start, stop = args
    raw = block_raw_intensity(spec, start, stop)
    return Accumulator.block_stats(raw, np.exp(-spec.time_grid), spec.normalization,
                                   spec.exclude_dark)


def _block_ranges(start, stop):
    edges = list(range((start // BLOCK + 1) * BLOCK, stop, BLOCK))
    bounds = [start] + edges + [stop]
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def accumulate(spec, start, stop, workers=1, progress=None):
    """Accumulator over realizations [start, stop)."""
    jobs = [(spec, a, b) for a, b in _block_ranges(start, stop)]
    acc = Accumulator(spec.time_grid)
    done = start
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_block_job, jobs)
            for (_, a, b), stats in zip(jobs, results):
                acc.blocks.append(stats)
                done = b
                if progress is not None:
                    progress(done - start)
    else:
        for job in jobs:
            acc.blocks.append(_block_job(job))
            done = job[2]
            if progress is not None:
                progress(done - start)
    return acc


def run_ensemble(spec, progress=None, workers=1):
    """Mean normalized guided intensity over ``spec.realizations`` configurations.

    ``progress`` receives the number of finished realizations; it is only
    ever called from the calling process, in realization order.
    """
    acc = accumulate(spec, 0, spec.realizations, workers, progress)
    return acc.finalize(spec.normalization)


def single_trace(config, spec):
    """Normalized guided trace of one fixed configuration (no averaging)."""
    cm = build_coupling_matrix(config, spec.mode, spec.kernels)
    b0 = initial_amplitudes(config, spec.drive_direction, spec.mode)
    amps = propagate(cm, b0, spec.time_grid)
    return guided_signal(amps, config, spec.mode, spec.time_grid, spec.both_polarizations)


def window_mask(time_grid, window):
    t = np.asarray(time_grid)
    start, end = window
    return (t >= start - 1e-9) & (t <= end + 1e-9)


def convergence_report(spec, checkpoints, windows=((0.1, 1.0), (6.0, 15.0)), workers=1):
    """[(count, max std_error inside the windows)] for nested prefixes of the ensemble."""
    checkpoints = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])) or any(c < 1 for c in checkpoints):
        raise ValidationError("checkpoints", "must be positive and strictly increasing")
    mask = np.zeros(spec.time_grid.shape, dtype=bool)
    for w in windows:
        mask |= window_mask(spec.time_grid, w)
    table, acc, prev = [], Accumulator(spec.time_grid), 0
    for c in checkpoints:
        acc = acc.merge(accumulate(spec, prev, c, workers))
        prev = c
        curve = acc.finalize(spec.normalization)
        table.append((c, float(curve.std_error[mask].max())))
    return table
