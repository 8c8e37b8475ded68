import math

import numpy as np
import pytest
from scipy import stats as sps

from conftest import make_env
from spinwalk.envs import coupled_triple_evolve, sample_initial, simulate_env
from spinwalk.noise import NoiseStream
from spinwalk.ratespec import InitialLaw, RateSpec, SpinConfig
from spinwalk.walks import (
    WALK_OK,
    WALK_OVERRUN,
    InftyZero,
    InternalNoise,
    Mixture,
    Pattern,
    PatternExtraJumps,
    WalkPath,
    alpha_beta_noise,
    assert_path_order,
    check_structural_assumptions,
    jump_functional,
    run_alpha_beta,
    run_infty_zero,
    run_walk,
    trap_pattern,
)


class TestJumpFunctional:
    def test_trap_gives_zero(self):
        cfg = SpinConfig(-2, 2, np.array([0, 1, 1, 0, 1], dtype=np.uint8))
        assert jump_functional(cfg, 0) == 0
        assert jump_functional(cfg, 1) == 0

    def test_inverted_trap_uses_bit(self):
        # (0,1) at origin; right trap at 2, left trap at -2
        cfg = SpinConfig(-2, 3, np.array([1, 0, 0, 1, 1, 0], dtype=np.uint8))
        assert jump_functional(cfg, 1) == 2
        assert jump_functional(cfg, 0) == -2

    def test_double_particle_scans_right(self):
        # (...,0,0 | 1,1,0,...): origin on the first 1 -> jump 1
        cfg = SpinConfig(-2, 2, np.array([0, 0, 1, 1, 0], dtype=np.uint8))
        assert jump_functional(cfg, 0) == 1

    def test_not_found(self):
        cfg = SpinConfig(-2, 2, np.ones(5, dtype=np.uint8))
        assert jump_functional(cfg, 1) is None


class TestInftyZero:
    def test_frozen_trap_never_moves(self):
        env = make_env(-3, 3, 10.0, [0, 0, 0, 1, 0, 0, 0], [])
        p = run_infty_zero(env, NoiseStream(0))
        assert p.ok and p.start == 0 and p.n_jumps == 0
        assert p.position(9.9) == 0

    def test_flip_right_moves_to_next_trap(self):
        # site 1 flips 0->1 at t=2: patch (1,1), next trap at 2
        env = make_env(-3, 3, 10.0, [0, 0, 0, 1, 0, 1, 0],
                       [(2.0, 1, 1)])
        p = run_infty_zero(env, NoiseStream(0))
        assert p.n_jumps == 1
        assert p.jump_times[0] == 2.0
        assert p.positions[0] == 2

    def test_hand_replayed_three_flips(self):
        # full step-by-step oracle replay
        env = make_env(-2, 2, 10.0, [1, 1, 1, 0, 0],
                       [(1.0, 1, 1), (2.0, 1, 0), (3.0, 0, 0)])
        p = run_infty_zero(env, NoiseStream(1))
        assert p.ok
        assert np.array_equal(p.jump_times, [1.0, 2.0, 3.0])
        assert np.array_equal(p.positions, [1, 0, -1])

    def test_deterministic_replay(self, indep_spec, bar_law):
        rng = np.random.default_rng(3)
        cfg = sample_initial(bar_law, indep_spec, -40, 40, rng)
        env = simulate_env(indep_spec, cfg, 20.0, rng)
        a = run_infty_zero(env, NoiseStream(9))
        b = run_infty_zero(env, NoiseStream(9))
        assert np.array_equal(a.jump_times, b.jump_times)
        assert np.array_equal(a.positions, b.positions)

    def test_overrun_reported(self):
        # all-ones to the right of the trap: first break scans off-window
        env = make_env(-2, 4, 10.0, [0, 0, 1, 0, 1, 1, 1],
                       [(1.0, 1, 1)])
        p = run_infty_zero(env, NoiseStream(0))
        assert p.status == WALK_OVERRUN

    def test_w0_from_inverted_trap(self):
        env = make_env(-2, 3, 5.0, [1, 0, 0, 1, 1, 0], [])
        # b0 decides: find seeds with either bit
        n1 = next(NoiseStream(s) for s in range(50) if NoiseStream(s).b0 == 1)
        n0 = next(NoiseStream(s) for s in range(50) if NoiseStream(s).b0 == 0)
        assert run_infty_zero(env, n1).start == 2
        assert run_infty_zero(env, n0).start == -2


class TestWalkPath:
    def test_cadlag_eval_and_export(self, tmp_path):
        p = WalkPath(1, np.array([0.5, 2.0]), np.array([3, -1]), 4.0)
        assert p.position(0.0) == 1
        assert p.position(0.5) == 3
        assert p.position(1.99) == 3
        assert p.position(2.0) == -1
        assert np.array_equal(p.positions_at(np.array([0.0, 0.5, 3.0])), [1, 3, -1])
        f = tmp_path / "w.csv"
        p.to_csv(f)
        lines = f.read_text().strip().splitlines()
        assert lines[0] == "jump_time,position"
        assert lines[1] == "0.0,1"
        assert lines[2] == "0.5,3"
        assert len(lines) == 4
        j = p.to_json()
        assert '"start": 1' in j

    def test_strictly_increasing_jump_times(self, indep_spec, bar_law):
        rng = np.random.default_rng(4)
        cfg = sample_initial(bar_law, indep_spec, -40, 40, rng)
        env = simulate_env(indep_spec, cfg, 30.0, rng)
        p = run_infty_zero(env, NoiseStream(5))
        assert np.all(np.diff(p.jump_times) > 0)


class TestMonotonicity:
    def test_identical_envs_identical_paths(self, indep_spec, bar_law):
        rng = np.random.default_rng(5)
        cfg = sample_initial(bar_law, indep_spec, -30, 30, rng)
        env = simulate_env(indep_spec, cfg, 15.0, rng)
        noise = NoiseStream(5)
        a = run_infty_zero(env, noise)
        b = run_infty_zero(env, noise)
        assert np.array_equal(a.positions, b.positions)

    def test_extra_particle_moves_walk_right(self, indep_spec, bar_law):
        # env2 = env1 with one extra frozen particle to the right
        rng = np.random.default_rng(6)
        checked = 0
        for seed in range(40):
            cfg = sample_initial(bar_law, indep_spec, -25, 25, rng)
            env1 = simulate_env(indep_spec, cfg, 8.0, rng)
            y = 12
            keep = env1.flip_x != y
            env1b = env1.with_modified(keep_mask=keep)
            init2 = env1b.init.copy()
            if init2[y - env1b.lo] == 1:
                continue
            init2[y - env1b.lo] = 1
            env2 = env1b.with_modified(init=init2)
            noise = NoiseStream(1000 + seed)
            p1 = run_infty_zero(env1b, noise)
            p2 = run_infty_zero(env2, noise)
            if p1.ok and p2.ok:
                assert_path_order(p1, p2)
                checked += 1
        assert checked >= 10

    def test_coupled_triples_ordered_walks(self, dep_spec, bar_law):
        violations = 0
        for seed in range(150):
            child = np.random.SeedSequence(seed)
            env_ss, noise_ss = child.spawn(2)
            rng = np.random.default_rng(env_ss)
            cfg = sample_initial(bar_law, dep_spec, -40, 40, rng)
            trip = coupled_triple_evolve(cfg, dep_spec, 6.0, rng=rng)
            noise = NoiseStream(noise_ss)
            paths = [run_infty_zero(tr, noise) for tr in trip]
            if not all(p.ok for p in paths):
                continue
            for a, b in ((0, 1), (1, 2)):
                try:
                    assert_path_order(paths[a], paths[b])
                except AssertionError:
                    violations += 1
        assert violations == 0


class TestGeneralizedModels:
    def test_pattern_10_equals_infty_zero(self, dep_spec, bar_law):
        for seed in range(25):
            child = np.random.SeedSequence(seed)
            env_ss, noise_ss = child.spawn(2)
            rng = np.random.default_rng(env_ss)
            cfg = sample_initial(bar_law, dep_spec, -30, 30, rng)
            trip = coupled_triple_evolve(cfg, dep_spec, 6.0, rng=rng)
            env = trip.mid
            noise = NoiseStream(noise_ss)
            a = run_infty_zero(env, noise)
            b = run_walk(env, trap_pattern(), noise)
            assert a.status == b.status
            if a.ok:
                assert a.start == b.start
                assert np.array_equal(a.jump_times, b.jump_times)
                assert np.array_equal(a.positions, b.positions)

    def test_internal_noise_zero_rates_stays_put(self, indep_spec, bar_law):
        rng = np.random.default_rng(8)
        cfg = sample_initial(bar_law, indep_spec, -20, 20, rng)
        env = simulate_env(indep_spec, cfg, 10.0, rng)
        model = InternalNoise(pi={1: 0.0, -1: 0.0}, R=0)
        p = run_walk(env, model, NoiseStream(3))
        assert p.ok and p.n_jumps == 0 and p.start == 0

    def test_mixture_p_one_is_pure_pattern(self, indep_spec, bar_law):
        pat = trap_pattern()
        inm = InternalNoise(pi={1: 0.5, -1: 0.5}, R=0)
        for seed in range(15):
            child = np.random.SeedSequence(1000 + seed)
            env_ss, noise_ss = child.spawn(2)
            rng = np.random.default_rng(env_ss)
            cfg = sample_initial(bar_law, indep_spec, -30, 30, rng)
            env = simulate_env(indep_spec, cfg, 8.0, rng)
            noise = NoiseStream(noise_ss)
            a = run_walk(env, Mixture(inm, pat, 1.0), noise)
            b = run_walk(env, pat, noise)
            assert a.status == b.status
            if a.ok:
                assert np.array_equal(a.jump_times, b.jump_times)
                assert np.array_equal(a.positions, b.positions)

    def test_pattern_longer_word(self, bar_law):
        # word (1,1): walk sits on double particles
        env = make_env(-3, 4, 10.0, [0, 0, 0, 1, 1, 0, 1, 1],
                       [(1.0, 1, 0), (2.0, 5, 0)])
        q = {0b00: 0.0, 0b01: 0.5, 0b10: 0.5}
        model = Pattern(aleph=(1, 1), q=q)
        noise = NoiseStream(4)
        p = run_walk(env, model, noise)
        assert p.ok and p.start == 0
        # at t=1 site 1 flips to 0: footprint (1,0) -> q=0.5 decides; the
        # only occurrence left starts at site 3 (sites 3,4)
        assert p.n_jumps >= 1
        assert p.positions[0] == 3

    def test_pattern_extra_jumps_gamma_clock(self, indep_spec, bar_law):
        rng = np.random.default_rng(9)
        cfg = sample_initial(bar_law, indep_spec, -30, 30, rng)
        env = simulate_env(indep_spec, cfg, 10.0, rng)
        model = PatternExtraJumps(trap_pattern(), noise_rate=2.0)
        p = run_walk(env, model, NoiseStream(11))
        assert p.ok
        base = run_walk(env, trap_pattern(), NoiseStream(11))
        # forced jumps make the extra-jump path jump at least as often
        assert p.n_jumps >= base.n_jumps


class TestAlphaBeta:
    def test_validation(self):
        with pytest.raises(ValueError):
            run_alpha_beta(make_env(-2, 2, 1.0, [1] * 5, []), 1.0, 2.0, NoiseStream(0))

    def test_symmetric_zero_mean(self, indep_spec, bar_law):
        rng = np.random.default_rng(10)
        disp = []
        for seed in range(300):
            cfg = sample_initial(bar_law, indep_spec, -40, 40, rng)
            env = simulate_env(indep_spec, cfg, 10.0, rng)
            p = run_alpha_beta(env, 1.0, 1.0, NoiseStream(2000 + seed))
            if p.ok:
                disp.append(p.final_position)
        disp = np.array(disp)
        se = disp.std(ddof=1) / math.sqrt(len(disp))
        assert abs(disp.mean()) < 4 * se

    def test_frozen_particles_biased_walk(self):
        # all-particle frozen env: drift alpha - beta, jumps Poisson(alpha+beta)
        alpha, beta, t = 1.5, 0.5, 20.0
        disp, counts = [], []
        for seed in range(400):
            env = make_env(-120, 120, t, [1] * 241, [])
            p = run_alpha_beta(env, alpha, beta, NoiseStream(3000 + seed))
            assert p.ok
            disp.append(p.final_position)
            counts.append(p.n_jumps)
        disp = np.array(disp)
        want = (alpha - beta) * t
        se = disp.std(ddof=1) / math.sqrt(len(disp))
        assert abs(disp.mean() - want) < 4 * se
        # jump counts: mean and variance of Poisson((alpha+beta) t)
        counts = np.array(counts)
        lam = (alpha + beta) * t
        assert abs(counts.mean() - lam) < 4 * math.sqrt(lam / len(counts))
        disp_stat = counts.var(ddof=1) / counts.mean()
        assert 0.8 < disp_stat < 1.2

    def test_jump_counts_poisson_on_random_env(self, indep_spec, bar_law):
        # the attempt thinning keeps jump counts Poisson((alpha+beta)t)
        alpha, beta, t = 1.2, 0.6, 15.0
        rng = np.random.default_rng(11)
        counts = []
        for seed in range(300):
            cfg = sample_initial(bar_law, indep_spec, -60, 60, rng)
            env = simulate_env(indep_spec, cfg, t, rng)
            p = run_alpha_beta(env, alpha, beta, NoiseStream(4000 + seed))
            if p.ok:
                counts.append(p.n_jumps)
        counts = np.array(counts)
        lam = (alpha + beta) * t
        assert abs(counts.mean() - lam) < 4 * math.sqrt(lam / len(counts))
        kmax = int(lam + 5 * math.sqrt(lam))
        obs = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
        probs = np.array([sps.poisson.pmf(k, lam) for k in range(kmax)]
                         + [1 - sps.poisson.cdf(kmax - 1, lam)])
        keep = probs * len(counts) >= 1.0
        chi = sps.chisquare(obs[keep], probs[keep] / probs[keep].sum() * obs[keep].sum())
        assert chi.pvalue > 1e-3


class TestStructuralAssumptions:
    def test_a1_suffix_replay_infty_zero(self, indep_spec, bar_law):
        for seed in range(20):
            child = np.random.SeedSequence(seed + 50)
            env_ss, noise_ss = child.spawn(2)
            rng = np.random.default_rng(env_ss)
            cfg = sample_initial(bar_law, indep_spec, -50, 50, rng)
            env = simulate_env(indep_spec, cfg, 12.0, rng)
            noise = NoiseStream(noise_ss)
            path = run_infty_zero(env, noise)
            if not path.ok:
                continue
            for n in (1, 5, 11):
                rep = check_structural_assumptions(
                    InftyZero(), env, noise, path, n, cone_m=6.0, cone_R=1
                )
                assert rep["A1"]["ok"], (seed, n, rep)
                assert rep["A3"]["ok"]

    def test_a2_cone_truncation(self, indep_spec, bar_law):
        hits = 0
        for seed in range(30):
            child = np.random.SeedSequence(seed + 90)
            env_ss, noise_ss = child.spawn(2)
            rng = np.random.default_rng(env_ss)
            cfg = sample_initial(bar_law, indep_spec, -60, 60, rng)
            env = simulate_env(indep_spec, cfg, 10.0, rng)
            noise = NoiseStream(noise_ss)
            path = run_infty_zero(env, noise)
            if not path.ok:
                continue
            rep = check_structural_assumptions(
                InftyZero(), env, noise, path, 1, cone_m=5.0, cone_R=1
            )
            assert rep["A2"]["ok"], seed
            hits += rep["A2"]["in_cone"]
        assert hits >= 5  # the cone test must actually engage

    def test_a1_mixture_across_boundary(self, indep_spec, bar_law):
        pat = trap_pattern()
        inm = InternalNoise(pi={1: 0.4, -1: 0.4}, R=0)
        model = Mixture(inm, pat, 0.5)
        done = 0
        for seed in range(40):
            child = np.random.SeedSequence(seed + 333)
            env_ss, noise_ss = child.spawn(2)
            rng = np.random.default_rng(env_ss)
            cfg = sample_initial(bar_law, indep_spec, -40, 40, rng)
            env = simulate_env(indep_spec, cfg, 8.0, rng)
            noise = NoiseStream(noise_ss)
            path = run_walk(env, model, noise)
            if not path.ok:
                continue
            # pick an n where the component switches
            xs = [noise.mixture_uniform(k) < 0.5 for k in range(1, 9)]
            switch = next((i + 1 for i in range(len(xs) - 1) if xs[i] != xs[i + 1]), None)
            if switch is None:
                continue
            rep = check_structural_assumptions(model, env, noise, path, switch)
            assert rep["A1"]["ok"], (seed, switch)
            done += 1
        assert done >= 5
