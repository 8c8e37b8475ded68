import numpy as np
import pytest

from spinwalk.ratespec import InitialLaw, RateSpec


@pytest.fixture
def indep_spec():
    return RateSpec.independent_flips(1.0, 1.0)


@pytest.fixture
def dep_spec():
    # attractive r=1 spec: p0 nonincreasing, p1 nondecreasing in the patch
    n = 8
    p0 = np.array([1.0 - bin(m).count("1") / 3.0 for m in range(n)])
    p1 = np.array([bin(m).count("1") / 3.0 for m in range(n)])
    return RateSpec(c0=1.0, c1=1.5, lam0=0.5, lam1=0.4, r=1, p0=p0, p1=p1)


@pytest.fixture
def bar_law():
    return InitialLaw("product", 0.5, 0.0, trap_conditioned=True)


def make_env(lo, hi, horizon, init, flips):
    """Hand-built trajectory: flips = [(t, x, new_state), ...] in time order."""
    from spinwalk.envs import EnvTrajectory

    flips = sorted(flips)
    return EnvTrajectory(
        lo, hi, horizon,
        np.asarray(init, dtype=np.uint8),
        np.array([f[0] for f in flips], dtype=float),
        np.array([f[1] for f in flips], dtype=np.int64),
        np.array([f[2] for f in flips], dtype=np.uint8),
    )
