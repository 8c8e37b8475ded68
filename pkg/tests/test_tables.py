import numpy as np
import pytest

from spinwalk import tables
from spinwalk.ratespec import RateSpec


def test_pair_closure_covers_all_states():
    t = tables.pair_tables()
    assert len(t) == 16
    assert set(t) == {(a, b) for a in range(4) for b in range(4)}


def test_triple_marginals_symbolic():
    tables.check_triple_marginals()


def test_pair_marginals_symbolic():
    tables.check_pair_marginals()


def test_diagonal_pair_states_move_together():
    # on the diagonal the two copies never separate (coalescence is absorbing)
    t = tables.pair_tables()
    for a in range(4):
        for (a2, b2), e in t[(a, a)].items():
            if a2 != b2:
                # such a transition must carry zero rate when c == c'
                spec = RateSpec(c0=1.0, c1=2.0, lam0=0.5, lam1=0.5)
                assert e.value(spec, 1.7, 1.7) == pytest.approx(0.0)


def test_rates_nonnegative_and_bounded():
    rng = np.random.default_rng(0)
    t = tables.pair_tables()
    for _ in range(30):
        spec = RateSpec(
            c0=rng.uniform(0.1, 2), c1=rng.uniform(0.1, 2),
            lam0=rng.uniform(0, 1.5), lam1=rng.uniform(0, 1.5), r=1,
            p0=rng.random(8), p1=rng.random(8),
        )
        lam = spec.total_rate_bound
        for (a, b), tab in t.items():
            for _ in range(4):
                c = spec.c0 + spec.lam0 * rng.random() if a >= 2 else spec.c1 + spec.lam1 * rng.random()
                cp = spec.c0 + spec.lam0 * rng.random() if b >= 2 else spec.c1 + spec.lam1 * rng.random()
                vals = [e.value(spec, c, cp) for e in tab.values()]
                assert min(vals) >= -1e-12
                assert sum(vals) <= lam + 1e-9


def test_middle_marginal_equals_c():
    # from (001): the middle's total 0->1 rate is c1 + (c - c1) = c
    spec = RateSpec(c0=1.0, c1=2.0, lam0=3.0, lam1=4.0)
    c = 4.2
    got = sum(
        e.value(spec, c, c)
        for tgt, e in tables.TRIPLE_TABLE[1]
        if tables.coords_of_level(tgt)[1] != tables.coords_of_level(1)[1]
    )
    assert got == pytest.approx(c)
