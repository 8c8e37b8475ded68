"""Envelope processes bounding the trap walk, and space-time cone statistics.

H+ observes the dominating independent-flip coordinate: it waits at G to
the left of the hole at G+1 until that hole flips to a particle, then
jumps right to the nearest trap. H- is the mirror image on the dominated
coordinate. Pathwise, H- <= Z <= H+ for walks built from the same coupled
triple, which is what `sandwich_check` verifies exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envs import EnvTrajectory
from .ratespec import RateSpec
from .walks import WALK_OK, WALK_OVERRUN, WalkPath

__all__ = [
    "ConeSpec",
    "ConeStats",
    "run_envelope",
    "cone_exit",
    "sandwich_check",
    "envelope_drifts",
    "default_cone",
]


@dataclass(frozen=True)
class ConeSpec:
    """R-enlarged m-cone {(x,t): |x| <= m t + R}."""

    m: float
    R: int = 1

    def __post_init__(self):
        if self.m <= 0 or self.R < 0:
            raise ValueError("need m > 0 and R >= 0")


@dataclass
class ConeStats:
    """First/last exit times of |path - start| > m t within the horizon."""

    S: float | None
    S_censored: bool
    S_hat: float | None
    S_hat_censored: bool
    outside_at_horizon: bool
    horizon: float


def envelope_drifts(spec: RateSpec) -> tuple[float, float]:
    """(H+ drift, |H-| drift) at the respective equilibria.

    H+ waits Exp(c1+lambda1) and jumps Geometric(1-rho_plus) on {1,2,...},
    so its drift is (c1+lambda1)/(1-rho_plus); mirror for H-.
    """
    d_plus = (spec.c1 + spec.lam1) / (1.0 - spec.rho_plus)
    d_minus = (spec.c0 + spec.lam0) / spec.rho_minus
    return d_plus, d_minus


def default_cone(spec: RateSpec, factor: float = 2.0, R: int = 1) -> ConeSpec:
    """Cone slope = factor x the larger equilibrium envelope drift."""
    d_plus, d_minus = envelope_drifts(spec)
    return ConeSpec(m=factor * max(d_plus, d_minus), R=R)


def run_envelope(side: str, env: EnvTrajectory, horizon: float | None = None) -> WalkPath:
    """Envelope walk on the corresponding independent-flip trajectory.

    ``env`` must carry a trap at the origin at time 0. '+' waits for the
    hole at G+1 to flip and jumps right; '-' waits for the particle at G
    to flip and jumps left.
    """
    if horizon is None:
        horizon = env.horizon
    if not (env.state(0, 0.0) == 1 and env.state(1, 0.0) == 0):
        raise ValueError("envelope runs need a trap at the origin")
    right = side == "+"
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    g, t = 0, 0.0
    times: list[float] = []
    xs: list[int] = []
    status = WALK_OK
    while True:
        watch = g + 1 if right else g
        u = env.next_flip(watch, t)
        if u > horizon or math.isinf(u):
            break
        # scan for the nearest trap in the move direction
        d = 0
        target = None
        while True:
            y = g + d if right else g - d
            if y < env.lo or y + 1 > env.hi:
                status = WALK_OVERRUN
                break
            if env.state(y, u) == 1 and env.state(y + 1, u) == 0:
                target = y
                break
            d += 1
        if status != WALK_OK:
            break
        g, t = target, u
        times.append(t)
        xs.append(g)
        if (right and g + 1 > env.hi) or (not right and g < env.lo):
            status = WALK_OVERRUN
            break
    return WalkPath(0, np.array(times), np.array(xs, dtype=np.int64), horizon, status)


def cone_exit(path: WalkPath, cone: ConeSpec, horizon: float | None = None) -> ConeStats:
    """Exact first/last exit of |path - start| > m t, from the jump skeleton.

    Between jumps |path| is constant while m t grows, so exits start only
    at jump times; the last-exit supremum of a segment is min(next jump,
    |position|/m). Values beyond the horizon are censoring-flagged.
    """
    if horizon is None:
        horizon = path.horizon
    m = cone.m
    rel = np.abs(path.positions - path.start).astype(np.float64)
    ts = path.jump_times
    inside_horizon = ts <= horizon
    out = rel > m * ts
    S = None
    first = np.nonzero(out & inside_horizon)[0]
    if len(first):
        S = float(ts[first[0]])
    s_hat = None
    outside_at_horizon = False
    for k in np.nonzero(out & inside_horizon)[0]:
        t_end = rel[k] / m
        nxt = ts[k + 1] if k + 1 < len(ts) else math.inf
        sup_k = min(t_end, nxt, horizon)
        s_hat = sup_k if s_hat is None else max(s_hat, sup_k)
        if min(t_end, nxt) > horizon:
            outside_at_horizon = True
    return ConeStats(
        S=S,
        S_censored=S is None,
        S_hat=s_hat,
        S_hat_censored=s_hat is None,
        outside_at_horizon=outside_at_horizon,
        horizon=horizon,
    )


def sandwich_check(z: WalkPath, hminus: WalkPath, hplus: WalkPath) -> None:
    """Exact H- <= Z <= H+ at the union of jump times; raises on violation."""
    for p in (z, hminus, hplus):
        if not p.ok:
            raise ValueError("sandwich check requires completed paths")
    if not (z.start == hminus.start == hplus.start):
        raise AssertionError("sandwich paths must share their start")
    ts = np.unique(np.concatenate([[0.0], z.jump_times, hminus.jump_times,
                                   hplus.jump_times]))
    a = hminus.positions_at(ts)
    b = z.positions_at(ts)
    c = hplus.positions_at(ts)
    bad = np.nonzero((a > b) | (b > c))[0]
    if len(bad):
        raise AssertionError(f"sandwich violated at t={ts[bad[0]]}")
