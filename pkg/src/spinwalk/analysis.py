"""Experiment-level estimators and quantitative checks.

Replicas fan out over spawned seed streams (one child per replica, split
again into environment and walk-noise streams), workers share nothing,
and every reducer is associative over replica indices, so results are
independent of thread count and aggregation order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .envelopes import ConeSpec, default_cone
from .envs import (
    EnvTrajectory,
    coupled_pair_evolve,
    evolve_from_log,
    sample_initial,
    simulate_env,
)
from .eventlog import KIND_CROSS1, EventLog, build_event_log
from .noise import NoiseStream
from .ratespec import InitialLaw, RateSpec
from .regen import (
    GammaSpec,
    ReplicaData,
    build_regeneration_times,
    gamma_spec_for,
    probe_zero_stats,
)
from .walks import (
    WALK_OK,
    WALK_OVERRUN,
    WALK_SIMULTANEOUS,
    InftyZero,
    WalkPath,
    assert_path_order,
    run_infty_zero,
    run_walk,
)

__all__ = [
    "SpeedEstimate",
    "estimate_speed",
    "speed_bounds",
    "check_speed_bounds",
    "lipschitz_coupling_experiment",
    "ui_moments",
    "mixing_decay_experiment",
    "run_replica",
    "replica_children",
]


def replica_children(seed, n: int):
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(n)


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


@dataclass
class SpeedEstimate:
    """Point estimate of the asymptotic velocity with its diagnostics."""

    w_hat: float
    stderr: float
    replicas: int
    n_used: int
    horizon: float
    method: str  # 'direct' | 'skeleton'
    overruns: int = 0
    simultaneous: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "w_hat": self.w_hat, "stderr": self.stderr,
            "replicas": self.replicas, "n_used": self.n_used,
            "horizon": self.horizon, "method": self.method,
            "overruns": self.overruns, "simultaneous": self.simultaneous,
            "extra": self.extra,
        }


def run_replica(child, spec: RateSpec, law: InitialLaw, model, lo: int, hi: int,
                horizon: float, keep_log: bool = False):
    """One replica: environment, noise, walk. Returns (path, ReplicaData)."""
    env_ss, noise_ss = child.spawn(2)
    rng = np.random.default_rng(env_ss)
    cfg = sample_initial(law, spec, lo, hi, rng)
    log = None
    if spec.independent and not keep_log:
        env = simulate_env(spec, cfg, horizon, rng)
    else:
        log = build_event_log(spec, lo, hi, horizon, rng)
        env = evolve_from_log(cfg, log, spec, "mid")
    noise = NoiseStream(noise_ss)
    if isinstance(model, InftyZero):
        path = run_infty_zero(env, noise)
    else:
        path = run_walk(env, model, noise)
    return path, ReplicaData(walk=path, env=env, log=log, noise=noise)


def _speed_worker(args):
    (child, spec, law, model, lo, hi, horizon, L, cone_m, cone_R, t0,
     lookahead, want_skeleton, want_probe0) = args
    path, data = run_replica(child, spec, law, model, lo, hi, horizon,
                             keep_log=not spec.independent)
    out = {"status": path.status, "value": None, "increments": None, "probe0": None}
    if path.ok:
        out["value"] = path.final_position / horizon
    if want_skeleton and path.ok:
        gspec = gamma_spec_for(model, L)
        rec = build_regeneration_times(
            data, gspec, ConeSpec(cone_m, cone_R), horizon, t0, lookahead
        )
        out["increments"] = rec.increments()
        out["skeleton_meta"] = {
            "ended": rec.ended,
            "h1_violations": rec.h1_violations,
            "n_probes": rec.n_probes,
            "n_gamma": rec.n_gamma,
            "n_regenerations": rec.n_regenerations,
        }
    if want_probe0 and path.ok:
        gspec = gamma_spec_for(model, L)
        out["probe0"] = probe_zero_stats(
            data, gspec, ConeSpec(cone_m, cone_R), lookahead
        )
    return out


def estimate_speed(
    spec: RateSpec,
    model,
    law: InitialLaw,
    horizon: float,
    replicas: int,
    seed,
    window: int,
    method: str = "direct",
    L: float = 1.0,
    cone: ConeSpec | None = None,
    t0: float | None = None,
    lookahead: float | None = None,
    threads: int = 1,
) -> dict:
    """Monte Carlo speed estimation over a fan-out of replicas.

    ``method``: 'direct' (mean of W_horizon / horizon), 'skeleton'
    (regeneration-skeleton ratio estimator), or 'both'. Aborted replicas
    (window overruns, simultaneous-break ties) are excluded and counted.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    cone = cone or default_cone(spec)
    want_sk = method in ("skeleton", "both")
    want_probe0 = method == "probe0"
    children = replica_children(seed, replicas)
    args = [
        (c, spec, law, model, -window, window, horizon, L, cone.m, cone.R,
         t0, lookahead, want_sk, want_probe0)
        for c in children
    ]
    results = _pmap(_speed_worker, args, threads)
    return reduce_speed_results(results, horizon, replicas, method)


def reduce_speed_results(results, horizon, replicas, method) -> dict:
    overruns = sum(r["status"] == WALK_OVERRUN for r in results)
    simultaneous = sum(r["status"] == WALK_SIMULTANEOUS for r in results)
    out: dict = {"replicas": replicas, "overruns": overruns,
                 "simultaneous": simultaneous}
    values = np.array([r["value"] for r in results if r["value"] is not None])
    if method in ("direct", "both"):
        if not len(values):
            raise RuntimeError("all replicas overran the window")
        se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else float("inf")
        out["direct"] = SpeedEstimate(
            w_hat=float(values.mean()), stderr=se, replicas=replicas,
            n_used=len(values), horizon=horizon, method="direct",
            overruns=overruns, simultaneous=simultaneous,
        )
    if method in ("skeleton", "both"):
        incs = [r["increments"] for r in results if r.get("increments") is not None
                and len(r["increments"])]
        metas = [r["skeleton_meta"] for r in results if r.get("skeleton_meta")]
        censoring = {
            "lookahead_censored": sum(m["ended"] == "lookahead-censored" for m in metas),
            "no_regeneration": sum(m["n_regenerations"] == 0 for m in metas),
            "h1_violations": sum(m["h1_violations"] for m in metas),
        }
        if not incs:
            raise RuntimeError("no uncensored skeleton increments")
        allinc = np.concatenate(incs, axis=0)
        dz, dt = allinc[:, 0], allinc[:, 1]
        v, u = float(dz.mean()), float(dt.mean())
        w = v / u
        resid = dz - w * dt
        se = float(resid.std(ddof=1) / math.sqrt(len(dz)) / u) if len(dz) > 1 else float("inf")
        out["skeleton"] = SpeedEstimate(
            w_hat=w, stderr=se, replicas=replicas, n_used=len(incs),
            horizon=horizon, method="skeleton",
            overruns=overruns, simultaneous=simultaneous,
            extra={"v_L": v, "u_L": u, "n_increments": int(len(dz)),
                   "censoring": censoring},
        )
    if method == "probe0":
        out["probe0"] = [r["probe0"] for r in results if r["probe0"] is not None]
    return out


def speed_bounds(spec: RateSpec) -> dict:
    """Sign-of-speed bounds by comparison with independent systems.

    Lower bound when c1 >= c0+lambda0, upper (negative) bound when
    c0 >= c1+lambda1; for independent flips these are the density
    criterion bounds.
    """
    out: dict = {"lower": None, "upper": None}
    if spec.c1 >= spec.c0 + spec.lam0:
        a = spec.c0 + spec.lam0
        out["lower"] = a / (spec.c1 + a) * (spec.c1 - a)
    if spec.c0 >= spec.c1 + spec.lam1:
        b = spec.c1 + spec.lam1
        out["upper"] = -b / (spec.c0 + b) * (spec.c0 - b)
    return out


def check_speed_bounds(spec: RateSpec, estimate: SpeedEstimate) -> dict:
    """Verdict: the estimate (with 3 sigma slack) respects the bounds."""
    bounds = speed_bounds(spec)
    w, se = estimate.w_hat, estimate.stderr
    verdict = dict(bounds)
    verdict["lower_ok"] = (
        None if bounds["lower"] is None else bool(w + 3 * se >= bounds["lower"])
    )
    verdict["upper_ok"] = (
        None if bounds["upper"] is None else bool(w - 3 * se <= bounds["upper"])
    )
    verdict["ok"] = all(v is not False for v in (verdict["lower_ok"], verdict["upper_ok"]))
    verdict["w_hat"] = w
    verdict["stderr"] = se
    return verdict


# -- Lipschitz coupling of the speed in the flip-to-particle rate ----------


def _merge_logs(lo, hi, horizon, parts):
    t = np.concatenate([p[0] for p in parts])
    x = np.concatenate([p[1] for p in parts])
    kind = np.concatenate([p[2] for p in parts])
    order = np.lexsort((kind, x, t))
    return EventLog(lo, hi, horizon, t[order], x[order], kind[order],
                    np.zeros(len(t))[order])


def _lipschitz_worker(args):
    child, d0, d1_low, delta_step, horizon, lo, hi = args
    env_ss, noise_ss = child.spawn(2)
    rng = np.random.default_rng(env_ss)
    n = hi - lo + 1
    rho_low = d1_low / (d0 + d1_low)
    rho_high = (d1_low + delta_step) / (d0 + d1_low + delta_step)
    u_init = rng.random(n)
    low_init = (u_init < rho_low).astype(np.uint8)
    high_init = (u_init < rho_high).astype(np.uint8)

    spec_low = RateSpec.independent_flips(d0, d1_low)
    base = build_event_log(spec_low, lo, hi, horizon, rng)
    counts = rng.poisson(delta_step * horizon, n)
    total = int(counts.sum())
    extra_t = rng.random(total) * horizon
    extra_x = np.repeat(np.arange(lo, hi + 1), counts)
    extra_k = np.full(total, KIND_CROSS1, dtype=np.uint8)

    from .ratespec import SpinConfig

    cfg_low = SpinConfig(lo, hi, low_init)
    cfg_high = SpinConfig(lo, hi, high_init)
    env_low = evolve_from_log(cfg_low, base, spec_low, "mid")
    log_high = _merge_logs(lo, hi, horizon, [
        (base.t, base.x, base.kind), (extra_t, extra_x, extra_k)
    ])
    env_high = evolve_from_log(cfg_high, log_high, spec_low, "mid")

    noise = NoiseStream(noise_ss)
    w_low = run_infty_zero(env_low, noise)
    if not w_low.ok:
        return {"status": w_low.status}

    # the one-event walk: first extra point at the site just right of W
    order = np.argsort(extra_t, kind="stable")
    s_time, s_site = None, None
    for i in order:
        if int(extra_x[i]) == w_low.position(float(extra_t[i])) + 1:
            s_time, s_site = float(extra_t[i]), int(extra_x[i])
            break
    if s_time is None:
        env_star = env_low
        w_star = w_low
    else:
        log_star = _merge_logs(lo, hi, horizon, [
            (base.t, base.x, base.kind),
            (np.array([s_time]), np.array([s_site], dtype=np.int64),
             np.array([KIND_CROSS1], dtype=np.uint8)),
        ])
        env_star = evolve_from_log(cfg_low, log_star, spec_low, "mid")
        w_star = run_infty_zero(env_star, noise)
    w_high = run_infty_zero(env_high, noise)
    if not (w_star.ok and w_high.ok):
        return {"status": WALK_OVERRUN}
    try:
        assert_path_order(w_low, w_star)
        assert_path_order(w_star, w_high)
        order_ok = True
    except AssertionError:
        order_ok = False
    return {
        "status": WALK_OK,
        "order_ok": order_ok,
        "gap": w_high.final_position - w_low.final_position,
    }


def lipschitz_coupling_experiment(
    d0: float, d1: float, delta: float, horizon: float, replicas: int, seed,
    window: int, n_steps: int = 1, threads: int = 1,
) -> dict:
    """Three-walk coupling: W <= W* <= W^delta pathwise, and the mean gap
    lower bound sum_k (d0/(d0+d1+k delta/n)) (1 - e^{-delta t / n}).

    With n_steps > 1 the telescoping refinement is exercised step by step.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    step = delta / n_steps if n_steps else 0.0
    children = replica_children(seed, replicas * max(n_steps, 1))
    total_gap_mean = 0.0
    total_gap_var = 0.0
    bound = 0.0
    violations = 0
    aborted = 0
    per_step = []
    for k in range(n_steps):
        d1k = d1 + k * step
        args = [
            (children[k * replicas + i], d0, d1k, step, horizon, -window, window)
            for i in range(replicas)
        ]
        results = _pmap(_lipschitz_worker, args, threads)
        gaps = np.array([r["gap"] for r in results if r.get("order_ok") is not None])
        violations += sum(1 for r in results if r.get("order_ok") is False)
        aborted += sum(1 for r in results if "gap" not in r)
        if not len(gaps):
            raise RuntimeError("all lipschitz replicas aborted")
        gm = float(gaps.mean())
        gv = float(gaps.var(ddof=1) / len(gaps)) if len(gaps) > 1 else float("inf")
        bk = d0 / (d0 + d1k) * (1.0 - math.exp(-step * horizon))
        per_step.append({"d1_low": d1k, "gap_mean": gm, "gap_se": math.sqrt(gv),
                         "bound": bk})
        total_gap_mean += gm
        total_gap_var += gv
        bound += bk
    se = math.sqrt(total_gap_var)
    return {
        "gap_mean": total_gap_mean,
        "gap_se": se,
        "bound": bound,
        "bound_ok": bool(total_gap_mean + 3 * se >= bound),
        "ordering_violations": violations,
        "aborted": aborted,
        "per_step": per_step,
        "n_steps": n_steps,
    }


# -- uniform integrability -------------------------------------------------


def _ui_worker(args):
    child, spec, law, model, lo, hi, horizon, grid = args
    path, _ = run_replica(child, spec, law, model, lo, hi, horizon)
    if not path.ok:
        return None
    return path.positions_at(np.asarray(grid)) - path.start


def ui_moments(spec: RateSpec, model, law: InitialLaw, horizon_grid, replicas: int,
               p_list, seed, window: int, threads: int = 1) -> dict:
    """Empirical E[|W_t/t|^p] over a time grid with a growth-trend check.

    Bounded moments show no positive trend: the 3-sigma slope interval
    must reach <= 0 for every p.
    """
    grid = np.asarray(sorted(horizon_grid), dtype=float)
    horizon = float(grid[-1])
    children = replica_children(seed, replicas)
    args = [(c, spec, law, model, -window, window, horizon, grid) for c in children]
    rows = [r for r in _pmap(_ui_worker, args, threads) if r is not None]
    if not rows:
        raise RuntimeError("all replicas overran the window")
    disp = np.abs(np.stack(rows) / grid[None, :])
    report: dict = {"grid": grid.tolist(), "replicas_used": len(rows), "moments": {}}
    for p in p_list:
        mom = (disp ** p).mean(axis=0)
        slope, se = _ols_slope(grid, mom)
        report["moments"][str(p)] = {
            "values": mom.tolist(),
            "slope": slope,
            "slope_se": se,
            "bounded_ok": bool(slope - 3 * se <= 0),
        }
    report["ok"] = all(v["bounded_ok"] for v in report["moments"].values())
    return report


def _ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    denom = float((xc ** 2).sum())
    slope = float((xc * y).sum() / denom)
    resid = y - y.mean() - slope * xc
    dof = max(len(x) - 2, 1)
    se = math.sqrt(float((resid ** 2).sum()) / dof / denom)
    return slope, se


# -- conditional cone-mixing proxy ------------------------------------------


def _phi_worker(args):
    child, spec, lo, hi, L, horizon, cone_m, cone_R = args
    from .contact import pair_discrepancy_in_cone
    from .envs import coupled_triple_evolve, trap_watch_kinds

    rng = np.random.default_rng(child)
    law = InitialLaw("product", spec.equilibrium_density_guess(), 0.0, True)
    cfgA = sample_initial(law, spec, lo, hi, rng)
    cfgB = cfgA.copy()
    mask = np.ones(cfgB.n_sites, dtype=bool)
    mask[0 - lo] = mask[1 - lo] = False
    cfgB.states[mask] ^= 1  # maximally discrepant off the trap
    log = build_event_log(spec, lo, hi, horizon, rng)
    censored = log.without_site_kinds(trap_watch_kinds(0, 1), L)
    tripA = coupled_triple_evolve(cfgA, spec, horizon, log=censored)
    tripB = coupled_triple_evolve(cfgB, spec, horizon, log=censored)
    return pair_discrepancy_in_cone(
        tripA, tripB, ConeSpec(cone_m, cone_R), L, horizon
    )


def _kappa_worker(args):
    # P(no cone exit after L | Gamma_L) sampled exactly: removing the
    # trap-breaking event streams IS the conditioning, so every replica
    # contributes (no rejection starvation at large L)
    child, spec, law, lo, hi, L, horizon, cone_m = args
    from .envs import simulate_conditioned_env
    from .regen import first_cone_exit_after

    env_ss, noise_ss = child.spawn(2)
    rng = np.random.default_rng(env_ss)
    cfg = sample_initial(law, spec, lo, hi, rng)
    trip = simulate_conditioned_env(spec, cfg, L, horizon, rng=rng)
    path = run_infty_zero(trip.mid, NoiseStream(noise_ss))
    if not path.ok:
        return None
    h1 = not np.any((path.jump_times > 0) & (path.jump_times <= L))
    exit_lag = first_cone_exit_after(path, L, cone_m, horizon)
    return {"confined": exit_lag is None, "h1": h1}


def _gamma_worker(args):
    child, spec, lo, hi, L = args
    from .envs import trap_watch_kinds

    rng = np.random.default_rng(child)
    log = build_event_log(spec, lo, hi, L, rng)
    for site, kinds in trap_watch_kinds(0, 1):
        if log.count_events(site, kinds, 0.0, L) > 0:
            return False
    return True


def mixing_decay_experiment(
    spec: RateSpec,
    model,
    L_grid,
    replicas: int,
    seed,
    window: int,
    cone: ConeSpec | None = None,
    phi_lookahead: float = 30.0,
    kappa_lookahead: float | None = None,
    kappa_replicas: int | None = None,
    threads: int = 1,
) -> dict:
    """Phi_hat, gamma_hat, kappa_hat over an L-grid.

    Phi_hat(L): twice the probability of a coupled-pair discrepancy inside
    the cone tipped at (0, L), from trap-conditioned evolution with the
    trap-breaking events censored up to L and a maximally discrepant
    partner configuration. kappa_hat(L): the conditional confinement
    probability, sampled from the exactly conditioned dynamics (the
    censored event streams realize the conditional law, so large L costs
    nothing); ``kappa_lookahead`` is the absolute no-exit watch window
    (one fixed value keeps kappa_hat comparable across the grid; None
    falls back to 10 L per the probing default). gamma_hat from plain
    event-void counts. The conditional cone-mixing hypothesis predicts
    Phi_hat/kappa_hat to decay along the grid.
    """
    if not isinstance(model, InftyZero):
        raise ValueError("the mixing experiment drives the trap walk")
    cone = cone or default_cone(spec)
    ss = np.random.SeedSequence(seed)
    phi_seed, kappa_seed, gamma_seed = ss.spawn(3)
    law = InitialLaw.default_for(spec, trap_conditioned=True)
    report = {"L_grid": list(L_grid), "phi": [], "gamma": [], "kappa": [],
              "ratio": [], "h1_violations": 0, "kappa_aborted": 0}
    for L in L_grid:
        horizon_phi = L + phi_lookahead
        children = phi_seed.spawn(replicas)
        args = [(c, spec, -window, window, L, horizon_phi, cone.m, cone.R)
                for c in children]
        hits = _pmap(_phi_worker, args, threads)
        phi = 2.0 * float(np.mean([bool(h) for h in hits]))

        lookahead = 10.0 * L if kappa_lookahead is None else kappa_lookahead
        horizon_probe = L + lookahead
        n_kappa = kappa_replicas or replicas
        children = kappa_seed.spawn(n_kappa)
        args = [(c, spec, law, -window, window, L, horizon_probe, cone.m)
                for c in children]
        stats = [s for s in _pmap(_kappa_worker, args, threads) if s is not None]
        report["kappa_aborted"] += n_kappa - len(stats)
        kappa_hat = float(np.mean([s["confined"] for s in stats])) if stats else 0.0
        report["h1_violations"] += sum(1 for s in stats if not s["h1"])

        children = gamma_seed.spawn(replicas)
        gammas = _pmap(_gamma_worker,
                       [(c, spec, -2, 3, L) for c in children], threads)
        gamma_hat = float(np.mean([bool(g) for g in gammas]))

        report["phi"].append(phi)
        report["gamma"].append(gamma_hat)
        report["kappa"].append(kappa_hat)
        report["ratio"].append(phi / kappa_hat if kappa_hat > 0 else float("inf"))
    rt = report["ratio"]
    report["strictly_decreasing"] = bool(
        all(rt[i + 1] < rt[i] for i in range(len(rt) - 1))
    )
    return report
