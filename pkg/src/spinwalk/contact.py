"""Threshold contact process on the environment's graphical representation.

Crosses are recoveries; an arrow pair infects its target iff some site
within the interaction range is infected just before the event. A healthy
site at (x,t) certifies that every backwards event path from (x,t) ends in
a cross, i.e. the spin state there is independent of the initial
configuration; `run_tcp_with_discrepancy` verifies that certificate
exactly against coupled replays, and the small-window backtracking oracle
recomputes healthy sets from first principles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .envelopes import ConeSpec
from .envs import EnvTrajectory, TripleTrajectory, coupled_triple_evolve, trap_watch_kinds
from .eventlog import EventLog
from .ratespec import RateSpec, SpinConfig

__all__ = [
    "run_tcp",
    "all_infected",
    "hat_infected",
    "tilde_censored",
    "run_tcp_with_discrepancy",
    "run_conditioned_pair",
    "healthy_implies_equal",
    "check_infection_domination",
    "backtracking_healthy",
    "oracle_healthy_set",
    "tcp_lcp_coupled",
    "extinction_stats",
    "pair_discrepancy_in_cone",
]


def all_infected(lo: int, hi: int) -> np.ndarray:
    return np.ones(hi - lo + 1, dtype=np.uint8)


def hat_infected(lo: int, hi: int, healthy_sites=(0, 1)) -> np.ndarray:
    inf = np.ones(hi - lo + 1, dtype=np.uint8)
    for s in healthy_sites:
        inf[s - lo] = 0
    return inf


def run_tcp(log: EventLog, spec: RateSpec, init_inf: np.ndarray,
            periodic: bool = False) -> EnvTrajectory:
    """Threshold contact process replay; infected=1, healthy=0."""
    out_t, out_xi, out_s, _ = kernels.tcp_evolve(
        np.ascontiguousarray(init_inf, dtype=np.uint8), spec.r,
        log.t, log.x - log.lo, log.kind, periodic, log.n_sites,
    )
    return EnvTrajectory(
        log.lo, log.hi, log.horizon, np.asarray(init_inf, dtype=np.uint8),
        out_t, out_xi + log.lo, out_s, "error",
    )


def tilde_censored(log: EventLog, L: float, sites=(0, 1)) -> EventLog:
    """Remove every Poisson event at the given sites up to time L."""
    drop = np.isin(log.x, list(sites)) & (log.t <= L)
    return log.filtered(drop)


def _union_site_times(x: int, trajs) -> np.ndarray:
    ts = [np.zeros(1)]
    for traj in trajs:
        times, _ = traj._site_slice(x)
        ts.append(times)
    return np.unique(np.concatenate(ts))


def healthy_implies_equal(zeta: EnvTrajectory, tripA: TripleTrajectory,
                          tripB: TripleTrajectory) -> list:
    """Exact scan: healthy at (x,t) forces TripA(x,t) == TripB(x,t).

    Returns the (site, time) violations; the states only change at the
    per-site event times, so checking those plus t=0 is exhaustive.
    """
    violations = []
    trajs = list(tripA) + list(tripB)
    for x in range(zeta.lo, zeta.hi + 1):
        ts = _union_site_times(x, trajs + [zeta])
        healthy = zeta.states_at_site(x, ts) == 0
        mismatch = np.zeros(len(ts), dtype=bool)
        for a, b in zip(tripA, tripB):
            mismatch |= a.states_at_site(x, ts) != b.states_at_site(x, ts)
        bad = np.nonzero(healthy & mismatch)[0]
        for i in bad:
            violations.append((x, float(ts[i])))
    return violations


def check_infection_domination(lower: EnvTrajectory, upper: EnvTrajectory) -> list:
    """Exact pointwise infected-set inclusion lower <= upper."""
    violations = []
    for x in range(lower.lo, lower.hi + 1):
        ts = _union_site_times(x, [lower, upper])
        bad = np.nonzero(lower.states_at_site(x, ts) > upper.states_at_site(x, ts))[0]
        for i in bad:
            violations.append((x, float(ts[i])))
    return violations


def run_tcp_with_discrepancy(log: EventLog, spec: RateSpec, initA: SpinConfig,
                             initB: SpinConfig) -> dict:
    """Couple two triples and the all-infected TCP on one shared log."""
    tripA = coupled_triple_evolve(initA, spec, log.horizon, log=log)
    tripB = coupled_triple_evolve(initB, spec, log.horizon, log=log)
    zeta = run_tcp(log, spec, all_infected(log.lo, log.hi))
    return {
        "zeta": zeta,
        "tripA": tripA,
        "tripB": tripB,
        "violations": healthy_implies_equal(zeta, tripA, tripB),
    }


def run_conditioned_pair(log: EventLog, spec: RateSpec, initA: SpinConfig,
                         initB: SpinConfig, L: float, sites=(0, 1)) -> dict:
    """Conditioned coupling: the trap-breaking events are removed for the
    spin systems, all events at the watched sites for the infection.

    The infection starts from all-infected-except-the-watched-sites; its
    healthy sites again certify equality, and it is dominated by the
    all-infected start on the same censored log.
    """
    for cfg in (initA, initB):
        if not (cfg.state(sites[0]) == 1 and cfg.state(sites[1]) == 0):
            raise ValueError("conditioned runs need traps at the watched sites")
    gamma_log = log.without_site_kinds(trap_watch_kinds(*sites), L)
    tl = tilde_censored(log, L, sites)
    tripA = coupled_triple_evolve(initA, spec, log.horizon, log=gamma_log)
    tripB = coupled_triple_evolve(initB, spec, log.horizon, log=gamma_log)
    zeta_hat = run_tcp(tl, spec, hat_infected(log.lo, log.hi, sites))
    zeta_under = run_tcp(tl, spec, all_infected(log.lo, log.hi))
    return {
        "zeta_hat": zeta_hat,
        "zeta_under": zeta_under,
        "tripA": tripA,
        "tripB": tripB,
        "violations": healthy_implies_equal(zeta_hat, tripA, tripB),
        "domination_violations": check_infection_domination(zeta_hat, zeta_under),
    }


def backtracking_healthy(log: EventLog, spec: RateSpec, x: int, t: float,
                         wall_L: float | None = None, wall_sites=(0, 1),
                         _memo=None) -> bool:
    """Path-tracing oracle: is the state at (x,t) independent of xi_0?

    Follows every backwards path through arrows; healthy iff each branch
    ends in a cross (or hits the conditioning wall {wall_sites}x[0,wall_L]
    when set). Exponential in the event density; small windows only.
    """
    if _memo is None:
        _memo = {}
    return _query(log, spec, x, t, False, wall_L, wall_sites, _memo)


def _query(log, spec, x, t, strict, wall_L, wall_sites, memo):
    on_wall_site = wall_L is not None and x in wall_sites
    if on_wall_site and t <= wall_L:
        return True
    if x < log.lo or x > log.hi:
        return True  # frozen fringe: determined
    times, ks = log.events_at(x)
    side = "left" if strict else "right"
    pos = int(np.searchsorted(times, t, side=side))
    if on_wall_site and (pos == 0 or times[pos - 1] <= wall_L):
        return True  # the backwards path reaches the wall
    if pos == 0:
        return False  # reaches time 0: depends on the initial state
    key = (x, pos)
    got = memo.get(key)
    if got is not None:
        return got
    e_t, e_k = float(times[pos - 1]), int(ks[pos - 1])
    if e_k <= 1:
        memo[key] = True
        return True
    ok = True
    for d in range(-spec.r, spec.r + 1):
        if not _query(log, spec, x + d, e_t, d == 0, wall_L, wall_sites, memo):
            ok = False
            break
    memo[key] = ok
    return ok


def oracle_healthy_set(log: EventLog, spec: RateSpec, t: float,
                       wall_L: float | None = None, wall_sites=(0, 1)) -> np.ndarray:
    memo: dict = {}
    return np.array(
        [
            _query(log, spec, x, t, False, wall_L, wall_sites, memo)
            for x in range(log.lo, log.hi + 1)
        ],
        dtype=bool,
    )


def tcp_lcp_coupled(log: EventLog, spec: RateSpec, rng: np.random.Generator):
    """TCP and a dominating linear contact process on shared randomness.

    The LCP shares all crosses and arrows and receives auxiliary
    per-site Poisson((lambda0+lambda1) * 2r) events thinned to supply the
    extra infection rate lambda_tot * (#infected neighbours - 1).
    Returns (tcp trajectory, lcp trajectory, inclusion violations).
    """
    lam_tot = spec.lam0 + spec.lam1
    n = log.n_sites
    r = spec.r
    aux_rate = lam_tot * 2 * r
    if aux_rate > 0:
        counts = rng.poisson(aux_rate * log.horizon, n)
        total = int(counts.sum())
        aux_t = rng.random(total) * log.horizon
        aux_x = np.repeat(np.arange(log.lo, log.hi + 1), counts)
        aux_u = rng.random(total)
    else:
        aux_t = np.zeros(0)
        aux_x = np.zeros(0, dtype=np.int64)
        aux_u = np.zeros(0)

    t_all = np.concatenate([log.t, aux_t])
    x_all = np.concatenate([log.x, aux_x])
    kind_all = np.concatenate([log.kind, np.full(len(aux_t), 9, dtype=np.uint8)])
    u_all = np.concatenate([np.zeros(len(log.t)), aux_u])
    order = np.lexsort((kind_all, x_all, t_all))

    tcp = all_infected(log.lo, log.hi)
    lcp = all_infected(log.lo, log.hi)
    tcp_fl: list = []
    lcp_fl: list = []
    violations: list = []

    def any_in_range(states, xi, exclude_self=False):
        c = 0
        for d in range(-r, r + 1):
            j = xi + d
            if j < 0 or j >= n or (exclude_self and d == 0):
                continue
            c += states[j]
        return c

    for i in order:
        xi = int(x_all[i] - log.lo)
        t = float(t_all[i])
        k = int(kind_all[i])
        if k <= 1:
            if tcp[xi]:
                tcp[xi] = 0
                tcp_fl.append((t, xi, 0))
            if lcp[xi]:
                lcp[xi] = 0
                lcp_fl.append((t, xi, 0))
        elif k == 9:
            if not lcp[xi]:
                kn = any_in_range(lcp, xi, exclude_self=True)
                if kn >= 1 and u_all[i] * (2 * r) < kn - 1:
                    lcp[xi] = 1
                    lcp_fl.append((t, xi, 1))
        else:
            if not tcp[xi] and any_in_range(tcp, xi):
                tcp[xi] = 1
                tcp_fl.append((t, xi, 1))
            if not lcp[xi] and any_in_range(lcp, xi):
                lcp[xi] = 1
                lcp_fl.append((t, xi, 1))
        if tcp[xi] > lcp[xi]:
            violations.append((int(x_all[i]), t))

    def pack(flips, init):
        if flips:
            arr = np.array(flips)
            tt, xx, ss = arr[:, 0], arr[:, 1].astype(np.int64) + log.lo, arr[:, 2].astype(np.uint8)
        else:
            tt = np.zeros(0)
            xx = np.zeros(0, dtype=np.int64)
            ss = np.zeros(0, dtype=np.uint8)
        return EnvTrajectory(log.lo, log.hi, log.horizon, init, tt, xx, ss, "error")

    return (
        pack(tcp_fl, all_infected(log.lo, log.hi)),
        pack(lcp_fl, all_infected(log.lo, log.hi)),
        violations,
    )


@dataclass
class ExtinctionReport:
    last_times: np.ndarray
    censored: int
    slope: float | None
    slope_stderr: float | None
    decaying: bool | None
    domination_violations: int
    replicas: int

    def to_dict(self) -> dict:
        return {
            "censored": self.censored,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "decaying": self.decaying,
            "domination_violations": self.domination_violations,
            "replicas": self.replicas,
            "mean_last_time": float(self.last_times.mean()) if len(self.last_times) else None,
        }


def _last_infected_in_box(zeta: EnvTrajectory, box_lo: int, box_hi: int) -> tuple[float, bool]:
    last = 0.0
    censored = False
    for x in range(box_lo, box_hi + 1):
        times, states = zeta._site_slice(x)
        if (len(states) and states[-1] == 1) or (not len(states) and zeta.init[x - zeta.lo]):
            censored = True
            last = zeta.horizon
        elif len(times):
            last = max(last, float(times[-1]))
    return last, censored


def extinction_stats(spec: RateSpec, lo: int, hi: int, horizon: float,
                     replicas: int, seed, box_radius: int = 10) -> ExtinctionReport:
    """Tail of the infection's last visit to a centered box, from the
    all-infected start, plus the exact TCP-within-LCP domination check.

    Subcriticality of (lambda0+lambda1)/(c0+c1) is the caller's claim;
    non-decaying tails are reported as such, not rejected.
    """
    from scipy import stats as sps

    ss = np.random.SeedSequence(seed)
    children = ss.spawn(replicas)
    from .eventlog import build_event_log

    last_times = []
    censored = 0
    dom_violations = 0
    box_lo, box_hi = max(lo, -box_radius), min(hi, box_radius)
    for child in children:
        rng = np.random.default_rng(child)
        log = build_event_log(spec, lo, hi, horizon, rng)
        tcp, lcp, viol = tcp_lcp_coupled(log, spec, rng)
        dom_violations += len(viol)
        t_last, cens = _last_infected_in_box(tcp, box_lo, box_hi)
        censored += int(cens)
        if not cens:
            last_times.append(t_last)
    last_times = np.array(sorted(last_times))
    slope = slope_se = None
    decaying = None
    n = len(last_times)
    if n >= 20:
        # log-survival regression over the upper half of the sample
        ks = np.arange(n // 2, n - 1)
        ts = last_times[ks]
        surv = (n - ks) / n
        res = sps.linregress(ts, np.log(surv))
        slope, slope_se = float(res.slope), float(res.stderr)
        decaying = bool(slope + 3.0 * slope_se < 0.0)
    return ExtinctionReport(
        last_times=last_times, censored=censored, slope=slope,
        slope_stderr=slope_se, decaying=decaying,
        domination_violations=dom_violations, replicas=replicas,
    )


def pair_discrepancy_in_cone(tripA: TripleTrajectory, tripB: TripleTrajectory,
                             cone: ConeSpec, t_min: float, horizon: float,
                             center: int = 0) -> bool:
    """Any site/time with TripA != TripB inside the cone tipped at (center, t_min)?"""
    trajs = list(tripA) + list(tripB)
    lo, hi = tripA.mid.lo, tripA.mid.hi
    for x in range(lo, hi + 1):
        entry = t_min + max(0.0, (abs(x - center) - cone.R) / cone.m)
        if entry > horizon:
            continue
        ts = _union_site_times(x, trajs)
        ts = np.concatenate([[entry], ts[(ts > entry) & (ts <= horizon)]])
        for a, b in zip(tripA, tripB):
            if np.any(a.states_at_site(x, ts) != b.states_at_site(x, ts)):
                return True
    return False
