"""Environment trajectories, simulation backends, and monotone couplings.

Two interchangeable integrators produce `EnvTrajectory` values:

* the graphical representation (`build_event_log` + `evolve_from_log`),
  exact for finite-range specs and the basis of every shared-randomness
  coupling, and
* a direct continuous-time chain backend (`simulate_env`), using per-site
  exponential clocks thinned against a uniform rate bound (with a closed
  form for independent flips).

Couplings: the ordered triple (xi_minus, xi, xi_plus) from a shared log or
from the basic-coupling rate table, pairs of triples for discrepancy decay,
and trap-conditioned variants where the trap-breaking events are censored
up to a depth L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .eventlog import (
    KIND_ARROW0,
    KIND_ARROW1,
    KIND_CROSS0,
    KIND_CROSS1,
    EventLog,
    ThinningLog,
    build_event_log,
    build_thinning_log,
)
from .ratespec import InitialLaw, RateSpec, SpinConfig, WindowOverrunError, patch_mask
from .tables import TRIPLE_TABLE, coords_of_level, pair_tables

__all__ = [
    "EnvTrajectory",
    "TripleTrajectory",
    "sample_initial",
    "simulate_env",
    "evolve_from_log",
    "coupled_triple_evolve",
    "coupled_pair_evolve",
    "simulate_conditioned_env",
    "trap_watch_kinds",
]

_VARIANT_TABLES = {
    "mid": None,  # spec tables
    "minus": "minus",  # 0-arrows always act, 1-arrows never
    "plus": "plus",
}


class EnvTrajectory:
    """Cadlag piecewise-constant environment path on a window.

    Canonical storage is per-site CSR (site-major, time-sorted per site);
    a globally time-sorted view is materialized lazily. Consecutive flips
    at one site alternate. State queries are cadlag: flips at time t are
    included in the state at t.
    """

    def __init__(self, lo, hi, horizon, init, flip_t, flip_x, flip_s,
                 boundary="error", ghost_left=None, ghost_right=None,
                 order="time", site_ptr=None):
        self.lo = int(lo)
        self.hi = int(hi)
        self.horizon = float(horizon)
        self.init = np.ascontiguousarray(init, dtype=np.uint8)
        self.boundary = boundary
        z = np.zeros(0, dtype=np.uint8)
        self.ghost_left = z if ghost_left is None else np.ascontiguousarray(ghost_left, dtype=np.uint8)
        self.ghost_right = z if ghost_right is None else np.ascontiguousarray(ghost_right, dtype=np.uint8)
        flip_t = np.ascontiguousarray(flip_t, dtype=np.float64)
        flip_x = np.ascontiguousarray(flip_x, dtype=np.int64)
        flip_s = np.ascontiguousarray(flip_s, dtype=np.uint8)
        self._time = None
        self._csr = None
        if order == "time":
            self._time = (flip_t, flip_x, flip_s)
        elif order == "site":
            if site_ptr is None:
                raise ValueError("site order needs site_ptr")
            self._csr = (np.ascontiguousarray(site_ptr, dtype=np.int64), flip_t, flip_s)
        else:
            raise ValueError(f"unknown flip order {order!r}")

    @property
    def n_sites(self) -> int:
        return self.hi - self.lo + 1

    @property
    def n_flips(self) -> int:
        if self._time is not None:
            return len(self._time[0])
        return len(self._csr[1])

    def _time_major(self):
        if self._time is None:
            ptr, site_t, site_s = self._csr
            order = np.argsort(site_t, kind="stable")
            counts = np.diff(ptr)
            xs = np.repeat(np.arange(self.lo, self.hi + 1), counts)
            self._time = (site_t[order], xs[order], site_s[order])
        return self._time

    @property
    def flip_t(self) -> np.ndarray:
        return self._time_major()[0]

    @property
    def flip_x(self) -> np.ndarray:
        return self._time_major()[1]

    @property
    def flip_s(self) -> np.ndarray:
        return self._time_major()[2]

    def csr(self):
        """(site_ptr, site_t, site_s): per-site time-sorted flip arrays."""
        if self._csr is None:
            t, x, s = self._time
            xi = x - self.lo
            order = np.lexsort((t, xi))
            counts = np.bincount(xi, minlength=self.n_sites)
            ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            self._csr = (ptr, t[order], s[order])
        return self._csr

    def _site_slice(self, x: int):
        ptr, site_t, site_s = self.csr()
        i = x - self.lo
        if not 0 <= i < self.n_sites:
            raise WindowOverrunError(f"site {x} outside window [{self.lo},{self.hi}]")
        return site_t[ptr[i]:ptr[i + 1]], site_s[ptr[i]:ptr[i + 1]]

    def state(self, x: int, t: float) -> int:
        times, states = self._site_slice(x)
        pos = np.searchsorted(times, t, side="right")
        if pos == 0:
            return int(self.init[x - self.lo])
        return int(states[pos - 1])

    def state_before(self, x: int, t: float) -> int:
        times, states = self._site_slice(x)
        pos = np.searchsorted(times, t, side="left")
        if pos == 0:
            return int(self.init[x - self.lo])
        return int(states[pos - 1])

    def states_at_site(self, x: int, ts: np.ndarray) -> np.ndarray:
        """Vectorized cadlag state of one site at many times."""
        times, states = self._site_slice(x)
        seq = np.concatenate([[self.init[x - self.lo]], states]).astype(np.uint8)
        return seq[np.searchsorted(times, ts, side="right")]

    def next_flip(self, x: int, t: float) -> float:
        times, _ = self._site_slice(x)
        pos = np.searchsorted(times, t, side="right")
        if pos >= len(times):
            return math.inf
        return float(times[pos])

    def flip_count(self, x: int, t0: float = 0.0, t1: float | None = None) -> int:
        times, _ = self._site_slice(x)
        if t1 is None:
            t1 = self.horizon
        a, b = np.searchsorted(times, [t0, t1], side="right")
        return int(b - a)

    def config_at(self, t: float) -> SpinConfig:
        states = self.init.copy()
        ptr, site_t, site_s = self.csr()
        for i in range(self.n_sites):
            seg = site_t[ptr[i]:ptr[i + 1]]
            pos = np.searchsorted(seg, t, side="right")
            if pos:
                states[i] = site_s[ptr[i] + pos - 1]
        return SpinConfig(
            self.lo, self.hi, states, self.boundary,
            self.ghost_left.copy(), self.ghost_right.copy(),
        )

    def shifted(self, n: float, x0: int) -> "EnvTrajectory":
        """Trajectory of theta_{x0} theta_n xi (flips after n, window relabeled)."""
        cfg = self.config_at(n)
        ptr, site_t, site_s = self.csr()
        keep = site_t > n
        counts = np.diff(ptr) - np.array(
            [np.searchsorted(site_t[ptr[i]:ptr[i + 1]], n, side="right")
             for i in range(self.n_sites)]
        )
        new_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return EnvTrajectory(
            self.lo - x0, self.hi - x0, self.horizon - n,
            cfg.states, site_t[keep] - n, np.zeros(0), site_s[keep],
            self.boundary, self.ghost_left.copy(), self.ghost_right.copy(),
            order="site", site_ptr=new_ptr,
        )

    def with_modified(self, init=None, keep_mask=None) -> "EnvTrajectory":
        """Copy with replaced initial states and/or a flip subset (tests).

        ``keep_mask`` indexes the time-major flip arrays.
        """
        keep = np.ones(self.n_flips, dtype=bool) if keep_mask is None else keep_mask
        return EnvTrajectory(
            self.lo, self.hi, self.horizon,
            self.init if init is None else init,
            self.flip_t[keep], self.flip_x[keep], self.flip_s[keep],
            self.boundary, self.ghost_left.copy(), self.ghost_right.copy(),
        )

    def verify(self) -> None:
        """Check the trajectory invariants (per-site sorted, alternating)."""
        ptr, site_t, site_s = self.csr()
        if len(site_t) and (site_t.min() < 0 or site_t.max() > self.horizon):
            raise AssertionError("flip outside [0, horizon]")
        for i in range(self.n_sites):
            seg_s = site_s[ptr[i]:ptr[i + 1]]
            seg_t = site_t[ptr[i]:ptr[i + 1]]
            if np.any(np.diff(seg_t) <= 0):
                raise AssertionError(f"non-increasing flip times at site {self.lo + i}")
            expect = 1 - self.init[i]
            for s in seg_s:
                if s != expect:
                    raise AssertionError(f"non-alternating flips at site {self.lo + i}")
                expect = 1 - expect


@dataclass
class TripleTrajectory:
    """Basic coupling (xi_minus, xi, xi_plus) from one initial configuration."""

    minus: EnvTrajectory
    mid: EnvTrajectory
    plus: EnvTrajectory
    log: EventLog | None = None

    def __iter__(self):
        return iter((self.minus, self.mid, self.plus))

    def check_order(self) -> None:
        """Exact scan: minus <= mid <= plus at every (site, event time)."""
        for x in range(self.minus.lo, self.minus.hi + 1):
            ts = [np.zeros(1)]
            for traj in self:
                times, _ = traj._site_slice(x)
                ts.append(times)
            ts = np.unique(np.concatenate(ts))
            a = self.minus.states_at_site(x, ts)
            b = self.mid.states_at_site(x, ts)
            c = self.plus.states_at_site(x, ts)
            bad = np.nonzero((a > b) | (b > c))[0]
            if len(bad):
                raise AssertionError(
                    f"triple order violated at site {x}, t={ts[bad[0]]}"
                )


def trap_watch_kinds(site0: int, site1: int):
    """(site, kinds) pairs whose absence keeps the trap (1,0) frozen."""
    return (
        (site0, (KIND_CROSS0, KIND_ARROW0)),
        (site1, (KIND_CROSS1, KIND_ARROW1)),
    )


def sample_initial(
    law: InitialLaw,
    spec: RateSpec,
    lo: int,
    hi: int,
    rng: np.random.Generator,
    boundary: str = "frozen",
) -> SpinConfig:
    """Draw an initial configuration (with frozen ghost fringes of width r)."""
    r = spec.r
    n = hi - lo + 1
    states_ext = (rng.random(n + 2 * r) < law.rho).astype(np.uint8)
    cfg = SpinConfig(
        lo, hi, states_ext[r:r + n] if r else states_ext,
        boundary if boundary != "frozen" or r else "frozen",
        states_ext[:r], states_ext[r + n:],
    )
    if law.kind == "equilibrium-burnin" and law.t_burn > 0:
        traj = simulate_env(spec, cfg, law.t_burn, rng, backend="log")
        cfg = traj.config_at(law.t_burn)
    if law.trap_conditioned:
        if not (lo <= 0 and 1 <= hi):
            raise ValueError("trap conditioning needs sites 0 and 1 in the window")
        cfg = cfg.with_trap()
    return cfg


def _traj_from_kernel(init: SpinConfig, horizon, out_t, out_xi, out_s) -> EnvTrajectory:
    return EnvTrajectory(
        init.lo, init.hi, horizon, init.states.copy(),
        out_t, out_xi + init.lo, out_s,
        init.boundary, init.ghost_left.copy(), init.ghost_right.copy(),
    )


def _variant_tables(spec: RateSpec, variant: str):
    n = 1 << (2 * spec.r + 1)
    if variant == "mid":
        return spec.p0, spec.p1
    if variant == "minus":
        return np.ones(n), np.zeros(n)
    if variant == "plus":
        return np.zeros(n), np.ones(n)
    raise ValueError(f"unknown variant {variant!r}")


def evolve_from_log(
    init: SpinConfig, log: EventLog, spec: RateSpec, variant: str = "mid"
) -> EnvTrajectory:
    """Deterministic replay of (init, log): crosses set states, arrow marks
    are tested against the variant's p-tables on the pre-event patch."""
    if init.lo != log.lo or init.hi != log.hi:
        raise ValueError("config window must match the event log window")
    periodic = init.boundary == "periodic"
    ext = init.states.copy() if periodic else init.extended_states(spec.r)
    p0, p1 = _variant_tables(spec, variant)
    out_t, out_xi, out_s = kernels.evolve_from_log(
        ext, spec.r, np.asarray(p0, dtype=np.float64), np.asarray(p1, dtype=np.float64),
        log.t, log.x - log.lo, log.kind, log.u, periodic, init.n_sites,
    )
    return _traj_from_kernel(init, log.horizon, out_t, out_xi, out_s)


def simulate_env(
    spec: RateSpec,
    init: SpinConfig,
    horizon: float,
    rng: np.random.Generator,
    backend: str = "auto",
) -> EnvTrajectory:
    """Simulate the single spin-flip system.

    ``auto`` uses the closed-form independent integrator when lambda0 =
    lambda1 = 0 and the graphical representation otherwise; ``direct``
    forces the thinned-clock chain backend.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if backend == "auto":
        backend = "independent" if spec.independent else "log"
    if backend == "independent":
        if not spec.independent:
            raise ValueError("independent backend requires lambda0 = lambda1 = 0")
        return _simulate_independent(spec, init, horizon, rng)
    if backend == "log":
        log = build_event_log(spec, init.lo, init.hi, horizon, rng)
        return evolve_from_log(init, log, spec, "mid")
    if backend == "direct":
        bound = max(spec.c0 + spec.lam0, spec.c1 + spec.lam1)
        tlog = build_thinning_log(bound, init.lo, init.hi, horizon, rng)
        return _evolve_single_thinning(spec, init, tlog, bound)
    raise ValueError(f"unknown backend {backend!r}")


def _simulate_independent(spec, init, horizon, rng) -> EnvTrajectory:
    """Exact alternating-exponential integrator for independent flips."""
    n = init.n_sites
    s0 = init.states.astype(np.uint8)
    if horizon == 0 or n == 0:
        return EnvTrajectory(
            init.lo, init.hi, horizon, s0.copy(),
            np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.uint8),
            init.boundary, init.ghost_left.copy(), init.ghost_right.copy(),
        )
    max_rate = max(spec.c0, spec.c1)
    mean = horizon * max_rate
    m = int(math.ceil(mean + 10.0 * math.sqrt(mean) + 20.0))
    gaps = rng.standard_exponential((n, m))
    parity = (np.arange(m, dtype=np.uint8) & 1)
    states_m = s0[:, None] ^ parity[None, :]
    rates = np.where(states_m == 1, spec.c0, spec.c1)
    times = np.cumsum(gaps / rates, axis=1)
    if np.any(times[:, -1] < horizon):
        raise RuntimeError("flip budget exhausted in independent integrator")
    mask = times < horizon
    counts = mask.sum(axis=1)
    flip_t = times[mask]  # row-major extraction is already site-major
    flip_s = (1 - states_m)[mask].astype(np.uint8)
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return EnvTrajectory(
        init.lo, init.hi, horizon, s0.copy(),
        flip_t, np.zeros(0), flip_s,
        init.boundary, init.ghost_left.copy(), init.ghost_right.copy(),
        order="site", site_ptr=ptr,
    )


def _evolve_single_thinning(spec, init, tlog: ThinningLog, bound: float) -> EnvTrajectory:
    periodic = init.boundary == "periodic"
    n = init.n_sites
    r = spec.r
    ext = init.states.copy() if periodic else init.extended_states(r)
    off = 0 if periodic else r
    out_t, out_x, out_s = [], [], []
    xs = tlog.x - tlog.lo
    for i in range(len(tlog.t)):
        xi = int(xs[i])
        mask = 0
        for d in range(2 * r + 1):
            site = xi - r + d
            if periodic:
                site %= n
            mask |= int(ext[site + off]) << d
        if tlog.u[i] * bound < spec.rate(mask):
            s_new = 1 - ext[xi + off]
            ext[xi + off] = s_new
            out_t.append(tlog.t[i])
            out_x.append(xi + init.lo)
            out_s.append(s_new)
    return EnvTrajectory(
        init.lo, init.hi, tlog.horizon, init.states.copy(),
        np.array(out_t), np.array(out_x, dtype=np.int64),
        np.array(out_s, dtype=np.uint8),
        init.boundary, init.ghost_left.copy(), init.ghost_right.copy(),
    )


def coupled_triple_evolve(
    init: SpinConfig,
    spec: RateSpec,
    horizon: float,
    rng: np.random.Generator | None = None,
    log: EventLog | None = None,
    backend: str = "log",
) -> TripleTrajectory:
    """Evolve (xi_minus, xi, xi_plus) from a shared initial configuration.

    ``log`` backend: the three deterministic replays of one event log
    (xi_minus ignores 1-arrows and accepts all 0-arrows, xi_plus the
    opposite). ``direct``: thinned clocks against the basic-coupling rate
    table. Both preserve the pointwise order for all time.
    """
    if backend == "log":
        if log is None:
            if rng is None:
                raise ValueError("need rng or log")
            log = build_event_log(spec, init.lo, init.hi, horizon, rng)
        return TripleTrajectory(
            evolve_from_log(init, log, spec, "minus"),
            evolve_from_log(init, log, spec, "mid"),
            evolve_from_log(init, log, spec, "plus"),
            log=log,
        )
    if backend == "direct":
        tlog = build_thinning_log(spec.total_rate_bound, init.lo, init.hi, horizon, rng)
        return _evolve_triple_thinning(spec, init, tlog)
    raise ValueError(f"unknown backend {backend!r}")


def _triple_rate_rows(spec, level, c):
    return [(tgt, e.value(spec, c, c)) for tgt, e in TRIPLE_TABLE[level]]


def _check_rates(rows, context):
    for tgt, rate in rows:
        if rate < -1e-12:
            raise ValueError(f"negative coupled rate {rate} for {context} -> {tgt}")


def _evolve_triple_thinning(
    spec, init, tlog: ThinningLog, skip_site_until=None
) -> TripleTrajectory:
    """Direct chain backend for the triple via the basic-coupling table.

    ``skip_site_until``: optional dict {site: time}; clock ticks at those
    sites up to the time are censored (trap conditioning).
    """
    periodic = init.boundary == "periodic"
    n = init.n_sites
    r = spec.r
    bound = spec.total_rate_bound
    lev = (3 * init.states.astype(np.int64))
    # middle states, extended for patch evaluation
    mid_ext = init.states.copy() if periodic else init.extended_states(r)
    off = 0 if periodic else r
    flips = ([], [], [])  # (t, x, s) triples per coordinate
    xs = tlog.x - tlog.lo
    for i in range(len(tlog.t)):
        xi = int(xs[i])
        t = float(tlog.t[i])
        if skip_site_until is not None:
            until = skip_site_until.get(xi + init.lo)
            if until is not None and t <= until:
                continue
        mask = 0
        for d in range(2 * r + 1):
            site = xi - r + d
            if periodic:
                site %= n
            mask |= int(mid_ext[site + off]) << d
        c = spec.rate(mask)
        rows = _triple_rate_rows(spec, int(lev[xi]), c)
        _check_rates(rows, f"level {int(lev[xi])}")
        acc = tlog.u[i] * bound
        new = None
        for tgt, rate in rows:
            if acc < rate:
                new = tgt
                break
            acc -= rate
        if new is None:
            continue
        old = int(lev[xi])
        lev[xi] = new
        oc, nc = coords_of_level(old), coords_of_level(new)
        for ci, store in enumerate(flips):
            if oc[ci] != nc[ci]:
                store.append((t, xi + init.lo, nc[ci]))
        if oc[1] != nc[1]:
            mid_ext[xi + off] = nc[1]
    trajs = []
    for store in flips:
        if store:
            arr = np.array(store)
            t_a, x_a, s_a = arr[:, 0], arr[:, 1].astype(np.int64), arr[:, 2].astype(np.uint8)
        else:
            t_a = np.zeros(0)
            x_a = np.zeros(0, dtype=np.int64)
            s_a = np.zeros(0, dtype=np.uint8)
        trajs.append(
            EnvTrajectory(
                init.lo, init.hi, tlog.horizon, init.states.copy(),
                t_a, x_a, s_a, init.boundary,
                init.ghost_left.copy(), init.ghost_right.copy(),
            )
        )
    return TripleTrajectory(*trajs, log=None)


def coupled_pair_evolve(
    initA: SpinConfig,
    initB: SpinConfig,
    spec: RateSpec,
    horizon: float,
    rng: np.random.Generator | None = None,
    log: EventLog | None = None,
    backend: str = "log",
) -> tuple[TripleTrajectory, TripleTrajectory]:
    """Two coupled triples from (possibly different) initial configurations.

    ``log``: both triples replay one shared event log (the coupling used
    for discrepancy decay of finite-range systems). ``direct``: thinned
    clocks against the pair-coupling table and its symmetric completions.
    """
    if backend == "log":
        if log is None:
            if rng is None:
                raise ValueError("need rng or log")
            log = build_event_log(spec, initA.lo, initA.hi, horizon, rng)
        return (
            coupled_triple_evolve(initA, spec, horizon, log=log, backend="log"),
            coupled_triple_evolve(initB, spec, horizon, log=log, backend="log"),
        )
    if backend == "direct":
        tlog = build_thinning_log(spec.total_rate_bound, initA.lo, initA.hi, horizon, rng)
        return _evolve_pair_thinning(spec, initA, initB, tlog)
    raise ValueError(f"unknown backend {backend!r}")


def _evolve_pair_thinning(spec, initA, initB, tlog: ThinningLog):
    periodic = initA.boundary == "periodic"
    n = initA.n_sites
    r = spec.r
    bound = spec.total_rate_bound
    tabs = {
        state: sorted(tab.items()) for state, tab in pair_tables().items()
    }
    levA = 3 * initA.states.astype(np.int64)
    levB = 3 * initB.states.astype(np.int64)
    midA = initA.states.copy() if periodic else initA.extended_states(r)
    midB = initB.states.copy() if periodic else initB.extended_states(r)
    off = 0 if periodic else r
    flips = ([], [], [], [], [], [])  # A-minus, A-mid, A-plus, B-minus, B-mid, B-plus
    xs = tlog.x - tlog.lo

    def mask_of(mid_ext, xi):
        m = 0
        for d in range(2 * r + 1):
            site = xi - r + d
            if periodic:
                site %= n
            m |= int(mid_ext[site + off]) << d
        return m

    for i in range(len(tlog.t)):
        xi = int(xs[i])
        t = float(tlog.t[i])
        c = spec.rate(mask_of(midA, xi))
        cp = spec.rate(mask_of(midB, xi))
        state = (int(levA[xi]), int(levB[xi]))
        rows = [(tgt, e.value(spec, c, cp)) for tgt, e in tabs[state]]
        _check_rates(rows, f"pair state {state}")
        acc = tlog.u[i] * bound
        new = None
        for tgt, rate in rows:
            if acc < rate:
                new = tgt
                break
            acc -= rate
        if new is None:
            continue
        oldA, oldB = state
        newA, newB = new
        levA[xi], levB[xi] = newA, newB
        for base, old, newlev, mid_ext in (
            (0, oldA, newA, midA), (3, oldB, newB, midB)
        ):
            oc, nc = coords_of_level(old), coords_of_level(newlev)
            for ci in range(3):
                if oc[ci] != nc[ci]:
                    flips[base + ci].append((t, xi + initA.lo, nc[ci]))
            if oc[1] != nc[1]:
                mid_ext[xi + off] = nc[1]

    def pack(store, init):
        if store:
            arr = np.array(store)
            t_a, x_a, s_a = arr[:, 0], arr[:, 1].astype(np.int64), arr[:, 2].astype(np.uint8)
        else:
            t_a, x_a, s_a = np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.uint8)
        return EnvTrajectory(
            init.lo, init.hi, tlog.horizon, init.states.copy(),
            t_a, x_a, s_a, init.boundary,
            init.ghost_left.copy(), init.ghost_right.copy(),
        )

    tripA = TripleTrajectory(*(pack(flips[i], initA) for i in range(3)))
    tripB = TripleTrajectory(*(pack(flips[i], initB) for i in range(3, 6)))
    return tripA, tripB


def simulate_conditioned_env(
    spec: RateSpec,
    init: SpinConfig,
    L: float,
    horizon: float,
    rng: np.random.Generator | None = None,
    log: EventLog | None = None,
    backend: str = "log",
    watch_sites: tuple[int, int] = (0, 1),
) -> TripleTrajectory:
    """Triple conditioned on the trap freeze up to time L.

    The trap-breaking events at ``watch_sites`` are censored on [0, L]
    (equivalently: those sites' rates vanish and every other rate is
    evaluated on the configuration carrying the trap); after L the
    unconditioned dynamics resume.
    """
    s0, s1 = watch_sites
    if not (init.state(s0) == 1 and init.state(s1) == 0):
        raise ValueError(f"initial configuration must have a trap at {watch_sites}")
    if backend == "log":
        if log is None:
            if rng is None:
                raise ValueError("need rng or log")
            log = build_event_log(spec, init.lo, init.hi, horizon, rng)
        censored = log.without_site_kinds(trap_watch_kinds(s0, s1), L)
        return coupled_triple_evolve(init, spec, horizon, log=censored, backend="log")
    if backend == "direct":
        tlog = build_thinning_log(spec.total_rate_bound, init.lo, init.hi, horizon, rng)
        return _evolve_triple_thinning(
            spec, init, tlog, skip_site_until={s0: L, s1: L}
        )
    raise ValueError(f"unknown backend {backend!r}")
