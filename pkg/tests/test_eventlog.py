import numpy as np
import pytest
from scipy import stats as sps

from spinwalk.eventlog import (
    KIND_ARROW0,
    KIND_ARROW1,
    KIND_CROSS0,
    KIND_CROSS1,
    EventLog,
    build_event_log,
    build_thinning_log,
)
from spinwalk.ratespec import RateSpec


def test_zero_horizon_empty():
    spec = RateSpec(c0=1.0, c1=1.0, lam0=2.0, lam1=2.0, r=0,
                    p0=np.ones(2), p1=np.ones(2))
    log = build_event_log(spec, -5, 5, 0.0, np.random.default_rng(0))
    assert len(log) == 0


def test_crosses_only_when_lambda_zero():
    spec = RateSpec.independent_flips(1.0, 1.0)
    log = build_event_log(spec, -10, 10, 20.0, np.random.default_rng(1))
    assert not np.any(log.kind >= KIND_ARROW0)
    # cross counts per site per stream ~ Poisson(horizon)
    n0 = int((log.kind == KIND_CROSS0).sum())
    n1 = int((log.kind == KIND_CROSS1).sum())
    lam = 21 * 20.0
    for n in (n0, n1):
        assert abs(n - lam) < 4 * np.sqrt(lam)


def test_poisson_counts_per_site():
    spec = RateSpec(c0=0.5, c1=0.0001 + 1.0, lam0=0.25, lam1=0.75, r=1,
                    p0=np.zeros(8), p1=np.zeros(8))
    rng = np.random.default_rng(2)
    log = build_event_log(spec, 0, 199, 10.0, rng)
    counts = np.bincount(
        (log.x - log.lo)[log.kind == KIND_ARROW1], minlength=200
    )
    # chi-square dispersion test for Poisson(lam1 * horizon)
    lam = 0.75 * 10.0
    stat = ((counts - lam) ** 2 / lam).sum()
    p = 1 - sps.chi2.cdf(stat, 200)
    assert p > 1e-4


def test_bit_identical_same_seed():
    spec = RateSpec(c0=1.0, c1=1.0, lam0=0.5, lam1=0.5, r=1,
                    p0=np.full(8, 0.5), p1=np.full(8, 0.5))
    a = build_event_log(spec, -20, 20, 15.0, np.random.default_rng(42))
    b = build_event_log(spec, -20, 20, 15.0, np.random.default_rng(42))
    for fa, fb in ((a.t, b.t), (a.x, b.x), (a.kind, b.kind), (a.u, b.u)):
        assert np.array_equal(fa, fb)


def test_times_sorted_and_in_range():
    spec = RateSpec(c0=1.0, c1=2.0, lam0=1.0, lam1=0.5, r=1,
                    p0=np.full(8, 0.5), p1=np.full(8, 0.5))
    log = build_event_log(spec, -10, 10, 7.5, np.random.default_rng(3))
    assert np.all(np.diff(log.t) >= 0)
    assert log.t.min() >= 0 and log.t.max() < 7.5
    arrows = log.kind >= KIND_ARROW0
    assert np.all((log.u[arrows] >= 0) & (log.u[arrows] < 1))


def test_event_queries_and_filtering():
    spec = RateSpec(c0=1.0, c1=1.0, lam0=1.0, lam1=1.0, r=1,
                    p0=np.full(8, 0.5), p1=np.full(8, 0.5))
    log = build_event_log(spec, -5, 5, 10.0, np.random.default_rng(4))
    x = 2
    times, kinds = log.events_at(x)
    assert np.all(np.diff(times) > 0)
    n_manual = int(((log.x == x) & (log.t > 1.0) & (log.t <= 4.0)
                    & np.isin(log.kind, [KIND_CROSS0, KIND_ARROW0])).sum())
    assert log.count_events(x, (KIND_CROSS0, KIND_ARROW0), 1.0, 4.0) == n_manual
    censored = log.without_site_kinds(
        [(0, (KIND_CROSS0, KIND_ARROW0)), (1, (KIND_CROSS1, KIND_ARROW1))], 5.0
    )
    assert censored.count_events(0, (KIND_CROSS0, KIND_ARROW0), 0.0, 5.0) == 0
    assert censored.count_events(1, (KIND_CROSS1, KIND_ARROW1), 0.0, 5.0) == 0
    # events after the cut survive
    after = log.count_events(0, (KIND_CROSS0, KIND_ARROW0), 5.0, 10.0)
    assert censored.count_events(0, (KIND_CROSS0, KIND_ARROW0), 5.0, 10.0) == after


def test_dump_load_roundtrip(tmp_path):
    spec = RateSpec(c0=1.0, c1=1.0, lam0=0.5, lam1=0.5, r=1,
                    p0=np.full(8, 0.3), p1=np.full(8, 0.7))
    log = build_event_log(spec, -8, 8, 5.0, np.random.default_rng(5))
    path = tmp_path / "log.npz"
    log.dump(path)
    again = EventLog.load(path)
    assert again.lo == log.lo and again.hi == log.hi
    assert again.horizon == log.horizon
    for fa, fb in ((again.t, log.t), (again.x, log.x), (again.kind, log.kind),
                   (again.u, log.u)):
        assert np.array_equal(fa, fb)


def test_thinning_log():
    tl = build_thinning_log(3.0, -10, 10, 8.0, np.random.default_rng(6))
    lam = 21 * 3.0 * 8.0
    assert abs(len(tl) - lam) < 5 * np.sqrt(lam)
    # sorted per site
    for x in range(-10, 11):
        sel = tl.t[tl.x == x]
        assert np.all(np.diff(sel) > 0)


def test_marks_assigned_per_site_in_time_order():
    # rebuilding with the same rng must give marks that follow each site's
    # arrow sequence; spot-check by regenerating manually
    spec = RateSpec(c0=0.5, c1=0.5, lam0=2.0, lam1=0.0, r=1,
                    p0=np.full(8, 0.5), p1=np.full(8, 0.5))
    log = build_event_log(spec, 0, 3, 6.0, np.random.default_rng(7))
    arrows = log.kind == KIND_ARROW0
    # per site, marks must be exactly the per-site sequence in time order:
    # uniqueness of floats suffices to check consistency of the assignment
    seen = {}
    for t, x, u in sorted(zip(log.t[arrows], log.x[arrows], log.u[arrows])):
        seen.setdefault(x, []).append((t, u))
    for x, pairs in seen.items():
        ts = [p[0] for p in pairs]
        assert ts == sorted(ts)
