"""Graphical representation: per-site Poisson crosses, arrow pairs, marks.

A j-cross at (x,t) sets the state at x to j; a j-arrow pair consults a
uniform mark against p_j evaluated on the pre-event patch. Event times
are strictly increasing per site per stream almost surely; float ties
across streams are resolved by the deterministic (time, site, stream)
sort order so replay is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ratespec import RateSpec

__all__ = [
    "EventLog",
    "ThinningLog",
    "build_event_log",
    "build_thinning_log",
    "KIND_CROSS0",
    "KIND_CROSS1",
    "KIND_ARROW0",
    "KIND_ARROW1",
]

KIND_CROSS0 = 0
KIND_CROSS1 = 1
KIND_ARROW0 = 2
KIND_ARROW1 = 3


@dataclass
class EventLog:
    """Time-sorted Poisson events over a site window, with arrow marks."""

    lo: int
    hi: int
    horizon: float
    t: np.ndarray
    x: np.ndarray  # absolute site index
    kind: np.ndarray
    u: np.ndarray  # uniform mark; meaningful for arrow events only
    _site_order: np.ndarray | None = field(default=None, repr=False)
    _site_ptr: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.t = np.ascontiguousarray(self.t, dtype=np.float64)
        self.x = np.ascontiguousarray(self.x, dtype=np.int64)
        self.kind = np.ascontiguousarray(self.kind, dtype=np.uint8)
        self.u = np.ascontiguousarray(self.u, dtype=np.float64)

    def __len__(self):
        return len(self.t)

    @property
    def n_sites(self) -> int:
        return self.hi - self.lo + 1

    def _site_index(self):
        if self._site_order is None:
            order = np.lexsort((self.t, self.x))
            self._site_order = order
            counts = np.bincount(self.x - self.lo, minlength=self.n_sites)
            self._site_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return self._site_order, self._site_ptr

    def events_at(self, x: int):
        """(times, kinds) of events at site x, in time order."""
        order, ptr = self._site_index()
        i = x - self.lo
        idx = order[ptr[i]:ptr[i + 1]]
        return self.t[idx], self.kind[idx]

    def count_events(self, x: int, kinds, t0: float, t1: float) -> int:
        """Number of events of the given kinds at site x with t0 < t <= t1."""
        times, ks = self.events_at(x)
        a, b = np.searchsorted(times, [t0, t1], side="right")
        window = ks[a:b]
        return int(np.isin(window, list(kinds)).sum())

    def filtered(self, drop_mask: np.ndarray) -> "EventLog":
        """Copy with events where ``drop_mask`` is True removed."""
        keep = ~drop_mask
        return EventLog(
            self.lo, self.hi, self.horizon,
            self.t[keep], self.x[keep], self.kind[keep], self.u[keep],
        )

    def without_site_kinds(self, site_kinds, t_max: float) -> "EventLog":
        """Drop events at (site, kind) pairs up to time t_max (conditioning)."""
        drop = np.zeros(len(self.t), dtype=bool)
        for site, kinds in site_kinds:
            m = (self.x == site) & (self.t <= t_max) & np.isin(self.kind, list(kinds))
            drop |= m
        return self.filtered(drop)

    def dump(self, path) -> None:
        np.savez_compressed(
            path, schema=np.int64(1), lo=np.int64(self.lo), hi=np.int64(self.hi),
            horizon=np.float64(self.horizon), t=self.t, x=self.x,
            kind=self.kind, u=self.u,
        )

    @classmethod
    def load(cls, path) -> "EventLog":
        with np.load(path) as z:
            if int(z["schema"]) != 1:
                raise ValueError(f"unsupported event log schema {int(z['schema'])}")
            return cls(
                int(z["lo"]), int(z["hi"]), float(z["horizon"]),
                z["t"], z["x"], z["kind"], z["u"],
            )


def build_event_log(
    spec: RateSpec, lo: int, hi: int, horizon: float, rng: np.random.Generator
) -> EventLog:
    """Sample the graphical representation on [lo,hi] x [0,horizon).

    Crosses at rates c_j, arrow pairs at rates lambda_j, independently
    across sites and streams; one uniform mark per arrow event, assigned
    per site in time order. Deterministic given the generator state.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    n = hi - lo + 1
    parts_t, parts_x, parts_k = [], [], []
    for kind, rate in (
        (KIND_CROSS0, spec.c0),
        (KIND_CROSS1, spec.c1),
        (KIND_ARROW0, spec.lam0),
        (KIND_ARROW1, spec.lam1),
    ):
        counts = rng.poisson(rate * horizon, n) if rate > 0 and horizon > 0 else np.zeros(n, dtype=np.int64)
        total = int(counts.sum())
        parts_t.append(rng.random(total) * horizon)
        parts_x.append(np.repeat(np.arange(lo, hi + 1), counts))
        parts_k.append(np.full(total, kind, dtype=np.uint8))
    t = np.concatenate(parts_t)
    x = np.concatenate(parts_x)
    kind = np.concatenate(parts_k)

    # marks: one per arrow event, consumed per site in time order
    u = np.zeros(len(t))
    arrows = kind >= KIND_ARROW0
    n_arrows = int(arrows.sum())
    if n_arrows:
        at, ax = t[arrows], x[arrows]
        order = np.lexsort((at, ax))
        marks = rng.random(n_arrows)
        au = np.empty(n_arrows)
        au[order] = marks
        u[arrows] = au

    order = np.lexsort((kind, x, t))
    return EventLog(lo, hi, horizon, t[order], x[order], kind[order], u[order])


@dataclass
class ThinningLog:
    """Per-site Poisson clock at a uniform rate bound, one mark per tick."""

    lo: int
    hi: int
    horizon: float
    rate: float
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def __len__(self):
        return len(self.t)


def build_thinning_log(
    rate: float, lo: int, hi: int, horizon: float, rng: np.random.Generator
) -> ThinningLog:
    """Clock ticks at ``rate`` per site with one uniform mark per tick."""
    n = hi - lo + 1
    counts = rng.poisson(rate * horizon, n) if rate > 0 and horizon > 0 else np.zeros(n, dtype=np.int64)
    total = int(counts.sum())
    t = rng.random(total) * horizon
    x = np.repeat(np.arange(lo, hi + 1), counts)
    u = rng.random(total)
    order = np.lexsort((x, t))
    return ThinningLog(lo, hi, horizon, rate, t[order], x[order], u[order])
