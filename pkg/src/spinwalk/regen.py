"""Regeneration-time construction and the skeleton speed estimator.

A probe at integer time T asks whether the regeneration-inducing event
holds on [T, T+L] relative to the walk (the trap/pattern under the walk
stays frozen, no walk-noise clock points, pattern intervals only), and
whether the recentred walk then stays inside the m-cone. Failed probes
advance by the probing stopping time (L, or L + ceil(exit)); a success
with no cone exit within the lookahead declares a regeneration at T and
restarts the recursion there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envelopes import ConeSpec
from .envs import EnvTrajectory, TripleTrajectory
from .eventlog import KIND_ARROW0, KIND_ARROW1, KIND_CROSS0, KIND_CROSS1, EventLog
from .walks import (
    CLOCK_EXTRA,
    CLOCK_INTERNAL,
    InftyZero,
    InternalNoise,
    Mixture,
    Pattern,
    PatternExtraJumps,
    WalkPath,
    trap_pattern,
)

__all__ = [
    "GammaSpec",
    "ReplicaData",
    "RegenerationRecord",
    "SkeletonEstimate",
    "gamma_spec_for",
    "gamma_indicator",
    "curly_T",
    "first_cone_exit_after",
    "build_regeneration_times",
    "probe_zero_stats",
    "skeleton_estimate",
]


@dataclass
class ReplicaData:
    """One replica's retained data, enough to evaluate probes exactly."""

    walk: WalkPath
    env: EnvTrajectory | None = None
    triple: TripleTrajectory | None = None
    log: EventLog | None = None
    noise: object | None = None


@dataclass(frozen=True)
class GammaSpec:
    """Model-tagged regeneration-inducing event of depth L.

    kinds: 'word-freeze' (trap and pattern models; the word under the
    walk stays frozen, decided from Poisson marks on the log backend or
    from coordinate flips on the coupled backend), 'clock' (no walk-clock
    points), 'word-freeze+clock' (pattern with extra jumps), 'mixture'
    (all pattern intervals and the word event).
    """

    L: float
    kind: str
    aleph: tuple = (1, 0)
    clock_tag: int = CLOCK_INTERNAL
    clock_rate: float = 0.0
    p_mix: float = 0.0

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.kind not in ("word-freeze", "clock", "word-freeze+clock", "mixture"):
            raise ValueError(f"unknown gamma kind {self.kind!r}")


def gamma_spec_for(model, L: float, spec=None) -> GammaSpec:
    """The paper's regeneration event for each model family."""
    if isinstance(model, InftyZero):
        return GammaSpec(L, "word-freeze", aleph=(1, 0))
    if isinstance(model, Pattern):
        return GammaSpec(L, "word-freeze", aleph=tuple(model.aleph))
    if isinstance(model, (InternalNoise,)):
        return GammaSpec(L, "clock", clock_tag=CLOCK_INTERNAL,
                         clock_rate=model.total_sup_rate())
    if isinstance(model, PatternExtraJumps):
        return GammaSpec(L, "word-freeze+clock", aleph=tuple(model.pattern.aleph),
                         clock_tag=CLOCK_EXTRA, clock_rate=model.noise_rate)
    if isinstance(model, Mixture):
        inner = model.spec1.pattern if isinstance(model.spec1, PatternExtraJumps) else model.spec1
        rate = model.spec1.noise_rate if isinstance(model.spec1, PatternExtraJumps) else 0.0
        return GammaSpec(
            L, "mixture", aleph=tuple(inner.aleph),
            clock_tag=CLOCK_EXTRA, clock_rate=rate, p_mix=model.p,
        )
    raise TypeError(f"no gamma event for model {model!r}")


def _word_watch_kinds(aleph, x0):
    """(site, breaking kinds) pairs for the word at x0..x0+R-1."""
    out = []
    for j, s in enumerate(aleph):
        if s == 1:
            out.append((x0 + j, (KIND_CROSS0, KIND_ARROW0)))
        else:
            out.append((x0 + j, (KIND_CROSS1, KIND_ARROW1)))
    return tuple(out)


def _word_freeze(gspec: GammaSpec, T: float, x: int, data: ReplicaData) -> bool:
    if data.log is not None:
        for site, kinds in _word_watch_kinds(gspec.aleph, x):
            if data.log.count_events(site, kinds, T, T + gspec.L) > 0:
                return False
        return True
    if data.triple is not None:
        for traj in data.triple:
            for j in range(len(gspec.aleph)):
                if traj.flip_count(x + j, T, T + gspec.L) > 0:
                    return False
        return True
    if data.env is not None:
        for j in range(len(gspec.aleph)):
            if data.env.flip_count(x + j, T, T + gspec.L) > 0:
                return False
        return True
    raise ValueError("word-freeze gamma needs a log, triple, or env")


def _no_clock(gspec: GammaSpec, T: float, data: ReplicaData) -> bool:
    if data.noise is None:
        raise ValueError("clock gamma needs the replica's noise stream")
    t, _ = data.noise.clock_events(gspec.clock_tag, gspec.clock_rate, T, T + gspec.L)
    return len(t) == 0


def gamma_indicator(gspec: GammaSpec, T: float, x: int, data: ReplicaData) -> bool:
    """Exact evaluation of the regeneration event at probe (T, walk at x)."""
    if gspec.kind == "word-freeze":
        return _word_freeze(gspec, T, x, data)
    if gspec.kind == "clock":
        return gspec.clock_rate == 0.0 or _no_clock(gspec, T, data)
    if gspec.kind == "word-freeze+clock":
        ok = _word_freeze(gspec, T, x, data)
        if ok and gspec.clock_rate > 0.0:
            ok = _no_clock(gspec, T, data)
        return ok
    if gspec.kind == "mixture":
        if data.noise is None:
            raise ValueError("mixture gamma needs the replica's noise stream")
        for k in range(int(T) + 1, int(T + gspec.L) + 1):
            if not data.noise.mixture_uniform(k) < gspec.p_mix:
                return False
        ok = _word_freeze(gspec, T, x, data)
        if ok and gspec.clock_rate > 0.0:
            ok = _no_clock(gspec, T, data)
        return ok
    raise ValueError(gspec.kind)


def curly_T(L: float, gamma: bool, exit_after_L: float | None) -> float:
    """The probing stopping time: L on failure, L + ceil(exit) on an exit,
    infinity when the event holds and no exit occurs."""
    if not gamma:
        return L
    if exit_after_L is None:
        return math.inf
    return L + math.ceil(exit_after_L)


def first_cone_exit_after(path: WalkPath, t_base: float, m: float,
                          t_limit: float) -> float | None:
    """inf{t > 0: |W_{t_base+t} - W_{t_base}| > m t}, scanned up to t_limit.

    Exits only start at jump times of the recentred path; returns the exit
    lag, or None if there is none with t_base + t <= t_limit.
    """
    base = path.position(t_base)
    k0 = np.searchsorted(path.jump_times, t_base, side="right")
    for k in range(k0, path.n_jumps):
        s = path.jump_times[k]
        if s > t_limit:
            return None
        lag = s - t_base
        if abs(int(path.positions[k]) - base) > m * lag:
            return float(lag)
    return None


@dataclass
class RegenerationRecord:
    """Probe trace and regeneration skeleton of one replica."""

    L: float
    t0: float
    cone: ConeSpec
    lookahead: float
    horizon: float
    taus: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    probes: list = field(default_factory=list)  # (time, gamma, outcome)
    n_probes: int = 0
    n_gamma: int = 0
    h1_violations: int = 0
    ended: str = "horizon"  # why probing stopped
    walk_status: int = 0

    @property
    def n_regenerations(self) -> int:
        return len(self.taus)

    def increments(self):
        """Skeleton increments (dz, dt) including the first point from 0."""
        if not len(self.taus):
            return np.zeros((0, 2))
        zs = np.concatenate([[0], self.zs])
        ts = np.concatenate([[0.0], self.taus])
        return np.stack([np.diff(zs).astype(float), np.diff(ts)], axis=1)


def build_regeneration_times(
    data: ReplicaData,
    gspec: GammaSpec,
    cone: ConeSpec,
    horizon: float | None = None,
    t0: float | None = None,
    lookahead: float | None = None,
    gamma_fn=None,
) -> RegenerationRecord:
    """Iterate probing along the walk and emit the regeneration skeleton.

    Probes live on the integer lattice: the first at anchor + t0; a failed
    event advances by L, an observed cone exit by L + ceil(exit lag), and
    a success with no exit within the lookahead window declares a
    regeneration at the probe time and re-anchors there.

    ``gamma_fn(T, x, data)`` overrides the event evaluation (synthetic
    oracle chains in tests).
    """
    path = data.walk
    if horizon is None:
        horizon = path.horizon
    L = gspec.L
    if t0 is None:
        t0 = L
    if lookahead is None:
        lookahead = 10.0 * L
    rec = RegenerationRecord(L, t0, cone, lookahead, horizon,
                             walk_status=path.status)
    if not path.ok:
        rec.ended = "walk-" + path.status_name
        return rec
    taus: list[float] = []
    zs: list[int] = []
    anchor = 0.0
    P = anchor + t0
    while True:
        if P + L > horizon:
            rec.ended = "horizon"
            break
        x_P = path.position(P)
        if gamma_fn is not None:
            gamma = bool(gamma_fn(P, x_P, data))
        else:
            gamma = gamma_indicator(gspec, P, x_P, data)
        rec.n_probes += 1
        if not gamma:
            rec.probes.append((P, False, "fail"))
            P += L
            continue
        rec.n_gamma += 1
        if np.any((path.jump_times > P) & (path.jump_times <= P + L)):
            rec.h1_violations += 1
        limit = min(horizon, P + L + lookahead)
        exit_lag = first_cone_exit_after(path, P + L, cone.m, limit)
        if exit_lag is not None:
            rec.probes.append((P, True, "exit"))
            P += curly_T(L, True, exit_lag)
            continue
        if P + L + lookahead > horizon:
            rec.probes.append((P, True, "censored"))
            rec.ended = "lookahead-censored"
            break
        # no exit within the lookahead: declare the regeneration
        rec.probes.append((P, True, "regen"))
        taus.append(P)
        zs.append(int(x_P - path.start))
        anchor = P
        P = anchor + t0
    rec.taus = np.array(taus)
    rec.zs = np.array(zs, dtype=np.int64)
    return rec


def probe_zero_stats(data: ReplicaData, gspec: GammaSpec, cone: ConeSpec,
                     lookahead: float | None = None) -> dict:
    """Time-0 probe outcomes feeding the gamma/kappa estimates.

    Returns gamma (event holds on [0,L] at the walk start), h1 (no walk
    motion on [0,L]; None unless gamma), confined (no cone exit after L
    within the lookahead; None unless gamma and the window fits).
    """
    path = data.walk
    L = gspec.L
    if lookahead is None:
        lookahead = 10.0 * L
    if not path.ok or L > path.horizon:
        return {"gamma": None, "h1": None, "confined": None}
    gamma = gamma_indicator(gspec, 0.0, path.start, data)
    out = {"gamma": gamma, "h1": None, "confined": None}
    if not gamma:
        return out
    out["h1"] = not np.any((path.jump_times > 0) & (path.jump_times <= L))
    limit = min(path.horizon, L + lookahead)
    exit_lag = first_cone_exit_after(path, L, cone.m, limit)
    if exit_lag is not None:
        out["confined"] = False
    elif L + lookahead <= path.horizon:
        out["confined"] = True
    return out


@dataclass
class SkeletonEstimate:
    """Speed estimate from pooled regeneration skeleton increments."""

    v_L: float
    u_L: float
    w_L: float
    stderr: float
    n_increments: int
    n_replicas: int
    n_replicas_with_regen: int
    censoring: dict

    def to_dict(self) -> dict:
        return {
            "v_L": self.v_L, "u_L": self.u_L, "w_L": self.w_L,
            "stderr": self.stderr, "n_increments": self.n_increments,
            "n_replicas": self.n_replicas,
            "n_replicas_with_regen": self.n_replicas_with_regen,
            "censoring": self.censoring,
        }


def skeleton_estimate(records: list[RegenerationRecord]) -> SkeletonEstimate:
    """Pool skeleton increments: w = mean(dz)/mean(dt), delta-method stderr."""
    incs = [r.increments() for r in records if r.n_regenerations]
    censoring = {
        "lookahead_censored": sum(r.ended == "lookahead-censored" for r in records),
        "no_regeneration": sum(
            r.n_regenerations == 0 and r.walk_status == 0 for r in records
        ),
        "aborted_walks": sum(r.walk_status != 0 for r in records),
        "h1_violations": sum(r.h1_violations for r in records),
    }
    if not incs:
        raise ValueError("no uncensored skeleton increments")
    allinc = np.concatenate(incs, axis=0)
    dz, dt = allinc[:, 0], allinc[:, 1]
    n = len(dz)
    v = float(dz.mean())
    u = float(dt.mean())
    w = v / u
    resid = dz - w * dt
    se = float(resid.std(ddof=1) / math.sqrt(n) / u) if n > 1 else float("inf")
    return SkeletonEstimate(
        v_L=v, u_L=u, w_L=w, stderr=se, n_increments=n,
        n_replicas=len(records),
        n_replicas_with_regen=sum(bool(r.n_regenerations) for r in records),
        censoring=censoring,
    )
