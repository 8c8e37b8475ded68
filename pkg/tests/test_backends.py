"""Cross-backend equality: the compiled kernels are bit-identical twins
of the pure-Python fallbacks on identical inputs."""

import numpy as np
import pytest

from spinwalk.envs import evolve_from_log, sample_initial
from spinwalk.eventlog import build_event_log
from spinwalk.kernels import get_backends
from spinwalk.ratespec import InitialLaw, RateSpec

BACKENDS = get_backends()

needs_both = pytest.mark.skipif(
    len(BACKENDS) < 2, reason="compiled extension not available"
)


def _case(seed, with_arrows=True):
    rng = np.random.default_rng(seed)
    if with_arrows:
        spec = RateSpec(c0=0.8, c1=1.2, lam0=0.6, lam1=0.4, r=1,
                        p0=rng.random(8), p1=rng.random(8))
    else:
        spec = RateSpec.independent_flips(1.0, 1.5)
    law = InitialLaw("product", 0.5, 0.0, True)
    cfg = sample_initial(law, spec, -30, 30, rng)
    log = build_event_log(spec, -30, 30, 10.0, rng)
    return spec, cfg, log


@needs_both
@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("with_arrows", [True, False])
def test_evolve_from_log_identical(seed, with_arrows):
    spec, cfg, log = _case(seed, with_arrows)
    ext = cfg.extended_states(spec.r)
    outs = {}
    for name, impl in BACKENDS.items():
        outs[name] = impl.evolve_from_log(
            ext, spec.r, spec.p0, spec.p1, log.t, log.x - log.lo, log.kind,
            log.u, False, cfg.n_sites,
        )
    a, b = outs.values()
    for fa, fb in zip(a, b):
        assert np.array_equal(np.asarray(fa), np.asarray(fb))


@needs_both
@pytest.mark.parametrize("seed", range(6))
def test_walk_identical(seed):
    spec, cfg, log = _case(seed)
    env = evolve_from_log(cfg, log, spec)
    ptr, site_t, site_s = env.csr()
    outs = {}
    for name, impl in BACKENDS.items():
        outs[name] = impl.walk_infty_zero(
            ptr, site_t, site_s, env.init, env.lo, env.hi, 0, env.horizon
        )
    (ta, xa, sa), (tb, xb, sb) = outs.values()
    assert sa == sb
    assert np.array_equal(ta, tb)
    assert np.array_equal(xa, xb)


@needs_both
@pytest.mark.parametrize("seed", range(6))
def test_tcp_identical(seed):
    spec, cfg, log = _case(seed)
    inf0 = np.ones(cfg.n_sites, dtype=np.uint8)
    outs = {}
    for name, impl in BACKENDS.items():
        outs[name] = impl.tcp_evolve(
            inf0, spec.r, log.t, log.x - log.lo, log.kind, False, cfg.n_sites
        )
    a, b = outs.values()
    for fa, fb in zip(a, b):
        assert np.array_equal(np.asarray(fa), np.asarray(fb))


@needs_both
def test_periodic_variant_identical():
    spec, cfg, log = _case(99)
    states = cfg.states.copy()
    outs = {}
    for name, impl in BACKENDS.items():
        outs[name] = impl.evolve_from_log(
            states, spec.r, spec.p0, spec.p1, log.t, log.x - log.lo, log.kind,
            log.u, True, cfg.n_sites,
        )
    a, b = outs.values()
    for fa, fb in zip(a, b):
        assert np.array_equal(np.asarray(fa), np.asarray(fb))


def test_backend_selection_env(monkeypatch):
    # the selector honours SPINWALK_BACKEND=py
    import importlib
    import subprocess
    import sys

    code = (
        "import os; os.environ['SPINWALK_BACKEND']='py'; "
        "import spinwalk; print(spinwalk.BACKEND)"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True)
    assert out.stdout.strip() == "python"
