"""Coupling rate tables for the ordered triple and for pairs of triples.

An ordered triple (xi_minus, xi, xi_plus) at one site is encoded by its
level = number of ones: 0=(000), 1=(001), 2=(011), 3=(111). Rates are
linear expressions in {c0, c1, lambda0, lambda1, c, c', min(c,c'),
max(c,c')} where c / c' denote the middle-coordinate flip rate of each
copy evaluated at its own current state and patch.

The pair table ships six states; the remaining ten are generated by
closing under the copy-exchange and particle/hole symmetries, and the
closure is checked for consistency.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ratespec import RateSpec

__all__ = [
    "Expr",
    "TRIPLE_TABLE",
    "pair_tables",
    "triple_outflow_bound",
    "check_triple_marginals",
    "check_pair_marginals",
    "coords_of_level",
]


@dataclass(frozen=True)
class Expr:
    """k0·consts + kc·c + kcp·c' + kmin·(c∧c') + kmax·(c∨c')."""

    c0: int = 0
    c1: int = 0
    l0: int = 0
    l1: int = 0
    c: int = 0
    cp: int = 0
    mn: int = 0
    mx: int = 0

    def value(self, spec: RateSpec, c: float, cp: float) -> float:
        return (
            self.c0 * spec.c0 + self.c1 * spec.c1
            + self.l0 * spec.lam0 + self.l1 * spec.lam1
            + self.c * c + self.cp * cp
            + self.mn * min(c, cp) + self.mx * max(c, cp)
        )

    def exchange(self) -> "Expr":
        return Expr(self.c0, self.c1, self.l0, self.l1, self.cp, self.c, self.mn, self.mx)

    def particles_holes(self) -> "Expr":
        return Expr(self.c1, self.c0, self.l1, self.l0, self.c, self.cp, self.mn, self.mx)

    def canonical(self) -> tuple:
        # eliminate max via max = c + c' - min
        return (
            self.c0, self.c1, self.l0, self.l1,
            self.c + self.mx, self.cp + self.mx, self.mn - self.mx,
        )

    def plus(self, other: "Expr") -> "Expr":
        return Expr(*(a + b for a, b in zip(self._tuple(), other._tuple())))

    def _tuple(self):
        return (self.c0, self.c1, self.l0, self.l1, self.c, self.cp, self.mn, self.mx)


_C1 = Expr(c1=1)
_C0 = Expr(c0=1)

# basic coupling of one ordered triple; middle rate c is contextual
TRIPLE_TABLE: dict[int, list[tuple[int, Expr]]] = {
    0: [(3, _C1), (2, Expr(c1=-1, c=1)), (1, Expr(c1=1, l1=1, c=-1))],
    1: [(3, _C1), (2, Expr(c1=-1, c=1)), (0, _C0)],
    2: [(3, _C1), (0, _C0), (1, Expr(c0=-1, c=1))],
    3: [(0, _C0), (1, Expr(c0=-1, c=1)), (2, Expr(c0=1, l0=1, c=-1))],
}

# the six pair states printed in the coupling appendix
_PAIR_BASE: dict[tuple[int, int], dict[tuple[int, int], Expr]] = {
    (0, 0): {
        (3, 3): _C1,
        (2, 2): Expr(c1=-1, mn=1),
        (2, 1): Expr(c=1, mn=-1),
        (1, 2): Expr(cp=1, mn=-1),
        (1, 1): Expr(c1=1, l1=1, mx=-1),
    },
    (1, 1): {
        (3, 3): _C1,
        (2, 2): Expr(c1=-1, mn=1),
        (2, 1): Expr(c=1, mn=-1),
        (1, 2): Expr(cp=1, mn=-1),
        (0, 0): _C0,
    },
    (1, 2): {
        (3, 3): _C1,
        (2, 2): Expr(c1=-1, c=1),
        (1, 1): Expr(c0=-1, cp=1),
        (0, 0): _C0,
    },
    (0, 1): {
        (3, 3): _C1,
        (2, 2): Expr(c1=-1, mn=1),
        (2, 1): Expr(c=1, mn=-1),
        (1, 2): Expr(cp=1, mn=-1),
        (1, 1): Expr(c1=1, l1=1, mx=-1),
        (0, 0): _C0,
    },
    (0, 2): {
        (3, 3): _C1,
        (2, 2): Expr(c1=-1, c=1),
        (1, 2): Expr(c1=1, l1=1, c=-1),
        (0, 0): _C0,
        (0, 1): Expr(c0=-1, cp=1),
    },
    (0, 3): {
        (3, 3): _C1,
        (2, 3): Expr(c1=-1, c=1),
        (1, 3): Expr(c1=1, l1=1, c=-1),
        (0, 0): _C0,
        (0, 1): Expr(c0=-1, cp=1),
        (0, 2): Expr(c0=1, l0=1, cp=-1),
    },
}

_pair_cache: dict[tuple[int, int], dict[tuple[int, int], Expr]] | None = None


def _canon_table(tab: dict) -> dict:
    return {k: v.canonical() for k, v in tab.items()}


def pair_tables() -> dict[tuple[int, int], dict[tuple[int, int], Expr]]:
    """All 16 pair-state tables, built by symmetry closure of the base six.

    Raises if the two symmetry routes to a state disagree (they never
    should; this is the consistency check on the transcription).
    """
    global _pair_cache
    if _pair_cache is not None:
        return _pair_cache

    def exchange(state, tab):
        a, b = state
        return (b, a), {(b2, a2): e.exchange() for (a2, b2), e in tab.items()}

    def ph(state, tab):
        a, b = state
        return (3 - a, 3 - b), {
            (3 - a2, 3 - b2): e.particles_holes() for (a2, b2), e in tab.items()
        }

    tables = {s: dict(t) for s, t in _PAIR_BASE.items()}
    changed = True
    while changed:
        changed = False
        for state in list(tables):
            for op in (exchange, ph):
                new_state, new_tab = op(state, tables[state])
                if new_state in tables:
                    if _canon_table(tables[new_state]) != _canon_table(new_tab):
                        raise AssertionError(
                            f"pair-coupling symmetry closure conflict at {new_state}"
                        )
                else:
                    tables[new_state] = new_tab
                    changed = True
    if len(tables) != 16:
        raise AssertionError(f"pair-coupling closure produced {len(tables)} states")
    _pair_cache = tables
    return tables


def coords_of_level(level: int) -> tuple[int, int, int]:
    """(minus, mid, plus) states for a triple level."""
    return (1 if level == 3 else 0, 1 if level >= 2 else 0, 1 if level >= 1 else 0)


def _single_coord_exprs():
    # coordinate -> (up-rate, down-rate); mid rates are the contextual c
    return {
        "minus": (Expr(c1=1), Expr(c0=1, l0=1)),
        "mid": (Expr(c=1), Expr(c=1)),
        "plus": (Expr(c1=1, l1=1), Expr(c0=1)),
    }


def check_triple_marginals() -> None:
    """Each coordinate's summed flip rate equals its single-system rate."""
    singles = _single_coord_exprs()
    for level, transitions in TRIPLE_TABLE.items():
        cur = coords_of_level(level)
        for ci, name in enumerate(("minus", "mid", "plus")):
            total = Expr()
            for new_level, e in transitions:
                if coords_of_level(new_level)[ci] != cur[ci]:
                    total = total.plus(e)
            # flipping up when current is 0 uses the up rate and vice versa
            expected = singles[name][0] if cur[ci] == 0 else singles[name][1]
            if total.canonical() != expected.canonical():
                raise AssertionError(
                    f"triple marginal mismatch: level {level}, coord {name}: "
                    f"{total.canonical()} != {expected.canonical()}"
                )


def check_pair_marginals() -> None:
    """Each copy's aggregated transitions reproduce the triple table.

    The c' (resp. c) dependence must cancel exactly in the first (resp.
    second) copy's marginal.
    """
    triple_canon = {
        a: {a2: e.canonical() for a2, e in TRIPLE_TABLE[a]} for a in range(4)
    }
    for (a, b), tab in pair_tables().items():
        for copy in (0, 1):
            agg: dict[int, Expr] = {}
            for (a2, b2), e in tab.items():
                tgt = (a2, b2)[copy]
                src = (a, b)[copy]
                if tgt != src:
                    agg[tgt] = agg.get(tgt, Expr()).plus(e)
            want = dict(triple_canon[(a, b)[copy]])
            got = {}
            for tgt, e in agg.items():
                ce = e.canonical() if copy == 0 else e.exchange().canonical()
                got[tgt] = ce
            if got != want:
                raise AssertionError(
                    f"pair marginal mismatch at state {(a, b)} copy {copy}: "
                    f"{got} != {want}"
                )


def triple_outflow_bound(spec: RateSpec) -> float:
    """Uniform bound on the total coupled outflow rate at one site."""
    return spec.total_rate_bound
