import math

import numpy as np
import pytest
from scipy import stats as sps

from spinwalk.contact import (
    all_infected,
    backtracking_healthy,
    check_infection_domination,
    extinction_stats,
    hat_infected,
    healthy_implies_equal,
    oracle_healthy_set,
    pair_discrepancy_in_cone,
    run_conditioned_pair,
    run_tcp,
    run_tcp_with_discrepancy,
    tcp_lcp_coupled,
    tilde_censored,
)
from spinwalk.envelopes import ConeSpec
from spinwalk.envs import coupled_pair_evolve, sample_initial, trap_watch_kinds
from spinwalk.eventlog import (
    KIND_ARROW1,
    KIND_CROSS0,
    KIND_CROSS1,
    EventLog,
    build_event_log,
)
from spinwalk.ratespec import InitialLaw, RateSpec


def simple_log(lo, hi, horizon, events):
    """events: list of (t, x, kind, u)."""
    events = sorted(events)
    return EventLog(
        lo, hi, horizon,
        np.array([e[0] for e in events], dtype=float),
        np.array([e[1] for e in events], dtype=np.int64),
        np.array([e[2] for e in events], dtype=np.uint8),
        np.array([e[3] for e in events], dtype=float),
    )


@pytest.fixture
def sub_spec():
    # finite-range, clearly subcritical dependence spread
    return RateSpec(c0=0.5, c1=0.5, lam0=0.15, lam1=0.15, r=1,
                    p0=np.full(8, 0.6), p1=np.full(8, 0.6))


class TestTcpBasics:
    def test_no_events_everyone_stays_infected(self, sub_spec):
        log = simple_log(-4, 4, 5.0, [])
        zeta = run_tcp(log, sub_spec, all_infected(-4, 4))
        assert zeta.n_flips == 0
        assert all(zeta.state(x, 4.9) == 1 for x in range(-4, 5))

    def test_single_cross_heals_no_reinfection(self, sub_spec):
        # one cross at (0, 1.0); no later arrows into 0
        log = simple_log(-4, 4, 5.0, [(1.0, 0, KIND_CROSS0, 0.0)])
        zeta = run_tcp(log, sub_spec, all_infected(-4, 4))
        assert zeta.state(0, 0.9) == 1
        assert zeta.state(0, 1.0) == 0
        assert zeta.state(0, 4.9) == 0

    def test_arrow_reinfects_from_neighbour(self, sub_spec):
        log = simple_log(-4, 4, 5.0, [
            (1.0, 0, KIND_CROSS0, 0.0),
            (2.0, 0, KIND_ARROW1, 0.5),
        ])
        zeta = run_tcp(log, sub_spec, all_infected(-4, 4))
        assert zeta.state(0, 1.5) == 0
        assert zeta.state(0, 2.0) == 1  # site 1 still infected within range

    def test_healthy_implies_equal_claim(self, sub_spec, bar_law):
        violations = 0
        for seed in range(30):
            rng = np.random.default_rng(seed)
            law = InitialLaw("product", 0.5, 0.0, False)
            cfgA = sample_initial(law, sub_spec, -15, 15, rng)
            cfgB = sample_initial(law, sub_spec, -15, 15, rng)
            log = build_event_log(sub_spec, -15, 15, 6.0, rng)
            res = run_tcp_with_discrepancy(log, sub_spec, cfgA, cfgB)
            violations += len(res["violations"])
        assert violations == 0


class TestConditioned:
    def test_watched_sites_healthy_through_L(self, sub_spec, bar_law):
        rng = np.random.default_rng(1)
        cfgA = sample_initial(bar_law, sub_spec, -10, 10, rng)
        cfgB = sample_initial(bar_law, sub_spec, -10, 10, rng)
        log = build_event_log(sub_spec, -10, 10, 8.0, rng)
        L = 4.0
        res = run_conditioned_pair(log, sub_spec, cfgA, cfgB, L)
        zh = res["zeta_hat"]
        for x in (0, 1):
            ts = np.linspace(0, L - 1e-9, 20)
            assert np.all(zh.states_at_site(x, ts) == 0)
        assert res["violations"] == []
        assert res["domination_violations"] == []

    def test_long_L_blocks_dependence_at_wall(self, sub_spec, bar_law):
        # L >= horizon, no events elsewhere: sites 0,1 healthy throughout
        log = simple_log(-5, 5, 4.0, [])
        rng = np.random.default_rng(2)
        cfgA = sample_initial(bar_law, sub_spec, -5, 5, rng)
        cfgB = sample_initial(bar_law, sub_spec, -5, 5, rng)
        res = run_conditioned_pair(log, sub_spec, cfgA, cfgB, 4.0)
        zh = res["zeta_hat"]
        assert zh.state(0, 3.9) == 0 and zh.state(1, 3.9) == 0
        assert res["violations"] == []

    def test_domination_many_replicas(self, sub_spec, bar_law):
        bad = 0
        for seed in range(25):
            rng = np.random.default_rng(100 + seed)
            cfgA = sample_initial(bar_law, sub_spec, -12, 12, rng)
            cfgB = sample_initial(bar_law, sub_spec, -12, 12, rng)
            log = build_event_log(sub_spec, -12, 12, 6.0, rng)
            res = run_conditioned_pair(log, sub_spec, cfgA, cfgB, 3.0)
            bad += len(res["domination_violations"]) + len(res["violations"])
        assert bad == 0


class TestBacktrackingOracle:
    def test_exhaustive_small_windows(self, sub_spec):
        for seed in range(60):
            rng = np.random.default_rng(seed)
            log = build_event_log(sub_spec, -4, 4, 5.0, rng)
            zeta = run_tcp(log, sub_spec, all_infected(-4, 4))
            for t in (1.7, 3.3, 5.0):
                healthy = np.array([zeta.state(x, t) == 0 for x in range(-4, 5)])
                assert np.array_equal(healthy, oracle_healthy_set(log, sub_spec, t))

    def test_exhaustive_small_windows_with_wall(self, sub_spec):
        L = 2.0
        for seed in range(60):
            rng = np.random.default_rng(1000 + seed)
            log = build_event_log(sub_spec, -4, 4, 5.0, rng)
            tl = tilde_censored(log, L)
            zhat = run_tcp(tl, sub_spec, hat_infected(-4, 4))
            for t in (1.0, 2.5, 4.5):
                healthy = np.array([zhat.state(x, t) == 0 for x in range(-4, 5)])
                orc = oracle_healthy_set(log, sub_spec, t, wall_L=L)
                assert np.array_equal(healthy, orc), (seed, t)

    def test_single_site_semantics(self, sub_spec):
        log = simple_log(-2, 2, 4.0, [(1.0, 0, KIND_CROSS1, 0.0)])
        assert backtracking_healthy(log, sub_spec, 0, 0.5) is False
        assert backtracking_healthy(log, sub_spec, 0, 1.0) is True
        assert backtracking_healthy(log, sub_spec, 1, 3.0) is False


class TestLcpDomination:
    def test_inclusion_exact(self, sub_spec):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            log = build_event_log(sub_spec, -15, 15, 8.0, rng)
            tcp, lcp, viol = tcp_lcp_coupled(log, sub_spec, rng)
            assert viol == []
            bad = check_infection_domination(tcp, lcp)
            assert bad == []

    def test_lambda_zero_extinction_is_first_cross(self):
        # crosses only: a site is healthy forever after its first cross
        spec = RateSpec.independent_flips(0.7, 0.6)
        rng = np.random.default_rng(3)
        log = build_event_log(spec, -10, 10, 12.0, rng)
        zeta = run_tcp(log, spec, all_infected(-10, 10))
        for x in range(-10, 11):
            times, kinds = log.events_at(x)
            flips, states = zeta._site_slice(x)
            if len(times) == 0:
                assert len(flips) == 0
            else:
                assert len(flips) == 1
                assert flips[0] == times[0]
                assert states[0] == 0

    def test_lambda_zero_healing_times_exponential(self):
        d0, d1 = 0.8, 0.5
        spec = RateSpec.independent_flips(d0, d1)
        rng = np.random.default_rng(4)
        heal = []
        for _ in range(40):
            log = build_event_log(spec, -10, 10, 30.0, rng)
            zeta = run_tcp(log, spec, all_infected(-10, 10))
            for x in range(-10, 11):
                flips, _ = zeta._site_slice(x)
                if len(flips):
                    heal.append(float(flips[0]))
        ks = sps.kstest(np.array(heal), "expon", args=(0, 1.0 / (d0 + d1)))
        assert ks.pvalue > 0.01


class TestExtinction:
    def test_subcritical_decay(self, sub_spec):
        rep = extinction_stats(sub_spec, -25, 25, 40.0, 120, seed=5, box_radius=5)
        assert rep.domination_violations == 0
        assert rep.decaying is True
        assert rep.slope < 0

    def test_report_dict(self, sub_spec):
        rep = extinction_stats(sub_spec, -10, 10, 15.0, 30, seed=6, box_radius=3)
        d = rep.to_dict()
        assert set(d) >= {"censored", "slope", "decaying", "replicas"}


class TestConeDiscrepancy:
    def test_equal_pairs_never_discrepant(self, sub_spec, bar_law):
        rng = np.random.default_rng(7)
        cfg = sample_initial(bar_law, sub_spec, -10, 10, rng)
        ta, tb = coupled_pair_evolve(cfg, cfg.copy(), sub_spec, 6.0, rng=rng)
        assert not pair_discrepancy_in_cone(ta, tb, ConeSpec(1.0, 1), 2.0, 6.0)

    def test_detects_center_discrepancy(self, sub_spec, bar_law):
        rng = np.random.default_rng(8)
        cfgA = sample_initial(bar_law, sub_spec, -10, 10, rng)
        cfgB = cfgA.copy()
        cfgB.states[5 - cfgB.lo] ^= 1  # inside the cone at L if it survives
        log = simple_log(-10, 10, 6.0, [])  # no events: discrepancy persists
        ta, _ = coupled_pair_evolve(cfgA, cfgA.copy(), sub_spec, 6.0, log=log)
        tb, _ = coupled_pair_evolve(cfgB, cfgB.copy(), sub_spec, 6.0, log=log)
        cone = ConeSpec(2.0, 1)
        assert pair_discrepancy_in_cone(ta, tb, cone, 2.0, 6.0)
        # a discrepancy far outside the cone is not seen
        cfgC = cfgA.copy()
        cfgC.states[10 - cfgC.lo] ^= 1
        tc, _ = coupled_pair_evolve(cfgC, cfgC.copy(), sub_spec, 6.0, log=log)
        assert not pair_discrepancy_in_cone(
            ta, tc, ConeSpec(1.0, 1), 2.0, 5.0
        )
