"""Benchmark the compiled kernels against the pure-Python fallbacks.

Runs the three hot kernels (event-log replay, trap-walk replay, threshold
contact process) on identical inputs under every available backend,
checks the outputs are bit-identical, and prints a throughput table.

Usage: python benchmarks/bench_backends.py [--events 200000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spinwalk.envs import evolve_from_log, sample_initial
from spinwalk.eventlog import build_event_log
from spinwalk.kernels import get_backends
from spinwalk.ratespec import InitialLaw, RateSpec


def _inputs(n_events_target: int, seed: int = 7):
    spec = RateSpec(
        c0=1.0, c1=1.5, lam0=0.5, lam1=0.5, r=1,
        p0=np.linspace(1, 0, 8), p1=np.linspace(0, 1, 8),
    )
    rate = spec.c0 + spec.c1 + spec.lam0 + spec.lam1
    window = 200
    horizon = max(n_events_target / ((2 * window + 1) * rate), 1.0)
    rng = np.random.default_rng(seed)
    law = InitialLaw("product", spec.equilibrium_density_guess(), 0.0, True)
    cfg = sample_initial(law, spec, -window, window, rng)
    log = build_event_log(spec, -window, window, horizon, rng)
    return spec, cfg, log


def bench(n_events: int, repeat: int) -> None:
    spec, cfg, log = _inputs(n_events)
    ext = cfg.extended_states(spec.r)
    xi = log.x - log.lo
    backends = get_backends()
    print(f"graphical-representation log: {len(log)} events, "
          f"window {cfg.n_sites} sites, horizon {log.horizon:.1f}")
    print(f"backends available: {', '.join(backends)}")

    env = evolve_from_log(cfg, log, spec, "mid")
    ptr, site_t, site_s = env.csr()
    inf0 = np.ones(cfg.n_sites, dtype=np.uint8)

    kernels = {
        "evolve_from_log": lambda impl: impl.evolve_from_log(
            ext, spec.r, spec.p0, spec.p1, log.t, xi, log.kind, log.u,
            False, cfg.n_sites,
        ),
        "walk_infty_zero": lambda impl: impl.walk_infty_zero(
            ptr, site_t, site_s, env.init, env.lo, env.hi, 0, env.horizon,
        ),
        "tcp_evolve": lambda impl: impl.tcp_evolve(
            inf0, spec.r, log.t, xi, log.kind, False, cfg.n_sites,
        ),
    }

    for name, run in kernels.items():
        results = {}
        print(f"\n{name}:")
        for bname, impl in backends.items():
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                out = run(impl)
                best = min(best, time.perf_counter() - t0)
            results[bname] = (best, out)
            print(f"  {bname:>8}: {best * 1e3:9.2f} ms   "
                  f"({len(log) / best / 1e6:7.2f} M events/s)")
        if len(results) == 2:
            (ta, outa), (tb, outb) = results.values()
            same = all(
                np.array_equal(np.asarray(a), np.asarray(b))
                for a, b in zip(outa, outb)
            )
            names = list(results)
            print(f"  bit-identical outputs: {same};  "
                  f"speedup {max(ta, tb) / min(ta, tb):.1f}x "
                  f"({names[int(ta > tb)]} faster)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    bench(args.events, args.repeat)
