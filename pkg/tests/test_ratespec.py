import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinwalk.ratespec import (
    InitialLaw,
    RateSpec,
    SpinConfig,
    WindowOverrunError,
    compute_M_epsilon,
    tr_scan,
)


class TestRateSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            RateSpec(c0=0.0, c1=1.0)
        with pytest.raises(ValueError):
            RateSpec(c0=1.0, c1=1.0, lam0=-0.1)
        with pytest.raises(ValueError):
            RateSpec(c0=1.0, c1=1.0, r=1, p0=np.zeros(4))  # needs 8 entries
        with pytest.raises(ValueError):
            RateSpec(c0=1.0, c1=1.0, r=0, p0=np.array([0.5, 1.5]))

    def test_derived_densities(self):
        spec = RateSpec(c0=1.0, c1=2.0, lam0=0.5, lam1=0.25, r=0,
                        p0=np.ones(2), p1=np.ones(2))
        assert spec.lam_plus == pytest.approx(1.0 + 2.0 + 0.25)
        assert spec.lam_minus == pytest.approx(1.0 + 0.5 + 2.0)
        assert spec.rho_plus == pytest.approx(2.25 / 3.25)
        assert spec.rho_minus == pytest.approx(2.0 / 3.5)

    def test_rate_lookup(self):
        # r=1: bit 1 is the center
        p0 = np.linspace(0, 1, 8)
        p1 = np.linspace(1, 0, 8)
        spec = RateSpec(c0=1.0, c1=2.0, lam0=3.0, lam1=4.0, r=1, p0=p0, p1=p1)
        for mask in range(8):
            want = 1.0 + 3.0 * p0[mask] if (mask >> 1) & 1 else 2.0 + 4.0 * p1[mask]
            assert spec.rate(mask) == pytest.approx(want)

    def test_serialization_roundtrip(self, dep_spec):
        again = RateSpec.from_json(dep_spec.to_json())
        assert again.c0 == dep_spec.c0
        assert again.r == dep_spec.r
        assert np.array_equal(again.p0, dep_spec.p0)
        assert np.array_equal(again.p1, dep_spec.p1)

    def test_attractive_predicate(self, dep_spec):
        assert dep_spec.is_attractive()
        bad = RateSpec(c0=1.0, c1=1.0, lam0=1.0, lam1=0.0, r=1,
                       p0=np.array([0, 1, 0, 1, 0, 1, 0, 1.0]), p1=np.zeros(8))
        assert not bad.is_attractive()


class TestMEpsilon:
    def test_independent_flips(self):
        # c ignores other sites: M=0, eps = d0+d1
        M, eps = compute_M_epsilon(RateSpec.independent_flips(1.0, 2.5))
        assert M == 0.0
        assert eps == pytest.approx(3.5)

    def test_r0_any_tables(self):
        spec = RateSpec(c0=1.0, c1=2.0, lam0=0.7, lam1=0.3, r=0,
                        p0=np.array([0.2, 0.9]), p1=np.array([0.4, 0.1]))
        M, eps = compute_M_epsilon(spec)
        assert M == 0.0  # no off-origin dependence
        # eps = min over own state of c(eta) + c(eta^0)
        c_at = {0: 2.0 + 0.3 * 0.4, 1: 1.0 + 0.7 * 0.9}
        assert eps == pytest.approx(c_at[0] + c_at[1])

    def test_r1_exhaustive_oracle(self, dep_spec):
        spec = dep_spec

        def c_of(window):  # window = (s[-1], s[0], s[+1])
            mask = window[0] | (window[1] << 1) | (window[2] << 2)
            if window[1] == 1:
                return spec.c0 + spec.lam0 * spec.p0[mask]
            return spec.c1 + spec.lam1 * spec.p1[mask]

        windows = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
        M_oracle = 0.0
        for xi in (0, 2):  # offsets -1, +1
            best = 0.0
            for w in windows:
                w2 = list(w)
                w2[xi] ^= 1
                best = max(best, abs(c_of(tuple(w2)) - c_of(w)))
            M_oracle += best
        eps_oracle = min(
            c_of(w) + c_of((w[0], w[1] ^ 1, w[2])) for w in windows
        )
        M, eps = compute_M_epsilon(spec)
        assert M == pytest.approx(M_oracle)
        assert eps == pytest.approx(eps_oracle)

    def test_range_cap(self):
        big = RateSpec(c0=1.0, c1=1.0, r=9, p0=np.zeros(1 << 19), p1=np.zeros(1 << 19))
        with pytest.raises(ValueError):
            compute_M_epsilon(big)


class TestTrScan:
    def test_trap_at_origin(self):
        cfg = SpinConfig(-2, 2, np.array([0, 0, 1, 0, 0], dtype=np.uint8))
        assert cfg.in_trap_set()
        assert tr_scan(cfg, "+") == 0
        assert tr_scan(cfg, "-") == 0

    def test_shifted_pattern(self):
        # states(0)=1, states(1)=1, states(2)=0 -> right trap at 1
        cfg = SpinConfig(-1, 3, np.array([1, 1, 1, 0, 0], dtype=np.uint8))
        assert tr_scan(cfg, "+") == 1

    def test_not_found_all_ones(self):
        cfg = SpinConfig(-3, 3, np.ones(7, dtype=np.uint8))
        assert tr_scan(cfg, "+") is None
        assert tr_scan(cfg, "-") is None

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=5, max_size=25), st.integers(0, 20))
    def test_matches_linear_scan_oracle(self, bits, shift):
        lo = -(shift % len(bits))
        hi = lo + len(bits) - 1
        cfg = SpinConfig(lo, hi, np.array(bits, dtype=np.uint8))
        plus = [x for x in range(max(0, lo), hi) if bits[x - lo] == 1 and bits[x + 1 - lo] == 0]
        minus = [x for x in range(lo, min(0, hi - 1) + 1) if bits[x - lo] == 1 and bits[x + 1 - lo] == 0]
        assert tr_scan(cfg, "+") == (min(plus) if plus else None)
        assert tr_scan(cfg, "-") == (max(minus) if minus else None)


class TestSpinConfig:
    def test_boundary_error(self):
        cfg = SpinConfig(0, 3, np.zeros(4, dtype=np.uint8))
        with pytest.raises(WindowOverrunError):
            cfg.state(5)

    def test_boundary_periodic(self):
        cfg = SpinConfig(0, 3, np.array([1, 0, 0, 1], dtype=np.uint8),
                         boundary="periodic")
        assert cfg.state(4) == 1
        assert cfg.state(-1) == 1

    def test_boundary_frozen(self):
        cfg = SpinConfig(0, 2, np.zeros(3, dtype=np.uint8), boundary="frozen",
                         ghost_left=np.array([1], dtype=np.uint8),
                         ghost_right=np.array([1], dtype=np.uint8))
        assert cfg.state(-1) == 1
        assert cfg.state(3) == 1
        assert np.array_equal(cfg.extended_states(1), [1, 0, 0, 0, 1])

    def test_with_trap(self):
        cfg = SpinConfig(-2, 2, np.zeros(5, dtype=np.uint8)).with_trap()
        assert cfg.in_trap_set()


class TestInitialLaw:
    def test_defaults(self, indep_spec, dep_spec):
        law = InitialLaw.default_for(indep_spec)
        assert law.kind == "product" and law.t_burn == 0.0
        assert law.rho == pytest.approx(0.5)
        law2 = InitialLaw.default_for(dep_spec)
        assert law2.kind == "equilibrium-burnin"
        assert law2.t_burn == pytest.approx(20.0 / (dep_spec.c0 + dep_spec.c1))

    def test_roundtrip(self):
        law = InitialLaw("equilibrium-burnin", 0.3, 2.0, True)
        assert InitialLaw.from_dict(law.to_dict()) == law

    def test_validation(self):
        with pytest.raises(ValueError):
            InitialLaw("nope")
        with pytest.raises(ValueError):
            InitialLaw("product", rho=1.5)
