import numpy as np
import pytest

from waveguide_decay import make_mode_spec
from waveguide_decay.ensemble_sampler import CloudSpec, sample_config, substream


@pytest.fixture(scope="session")
def mode():
    return make_mode_spec()


def random_configs(count, seed, n_range=(2, 6), fwhm=2000.0):
    """Deterministic random clouds; a small FWHM keeps near-field pairs common."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        out.append(sample_config(CloudSpec.single(0.0, fwhm, n), substream(seed, k)))
    return out
