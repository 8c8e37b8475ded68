"""Runnable property suites: the exact couplings and statistical laws.

Each suite returns a dict with an ``ok`` verdict and the evidence; the
CLI ``verify`` subcommand and the acceptance tests share these
implementations.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from . import tables
from .analysis import estimate_speed, replica_children, run_replica
from .contact import (
    healthy_implies_equal,
    oracle_healthy_set,
    run_conditioned_pair,
    run_tcp,
    run_tcp_with_discrepancy,
    tcp_lcp_coupled,
    tilde_censored,
    all_infected,
    hat_infected,
)
from .envelopes import ConeSpec, default_cone, run_envelope, sandwich_check
from .envs import (
    coupled_triple_evolve,
    evolve_from_log,
    sample_initial,
    simulate_env,
    trap_watch_kinds,
)
from .eventlog import build_event_log
from .noise import NoiseStream
from .ratespec import InitialLaw, RateSpec, SpinConfig
from .regen import ReplicaData, gamma_spec_for, probe_zero_stats
from .walks import InftyZero, assert_path_order, run_infty_zero

__all__ = [
    "suite_coupling_algebra",
    "suite_triple_order",
    "suite_monotonicity",
    "suite_sandwich",
    "suite_healthy_discrepancy",
    "suite_h_stats",
    "suite_envelope_laws",
    "suite_exchangeability",
]


def suite_coupling_algebra(spec: RateSpec) -> dict:
    """Exact marginal algebra of the triple and pair coupling tables.

    Symbolic identities plus numeric enumeration over every local coupled
    state and every patch (pair) of the spec, at zero tolerance.
    """
    tables.check_triple_marginals()
    tables.check_pair_marginals()
    n = 1 << (2 * spec.r + 1)
    lam = spec.total_rate_bound
    worst = 0.0
    # triple: per level and patch, marginal flip rates match the single systems
    for level in range(4):
        minus, mid, plus = tables.coords_of_level(level)
        for mask in range(n):
            m_center = (mask >> spec.r) & 1
            if m_center != mid:
                continue  # the patch center is the middle coordinate
            c = spec.rate(mask)
            rows = [(tgt, e.value(spec, c, c)) for tgt, e in tables.TRIPLE_TABLE[level]]
            tot = sum(rate for _, rate in rows)
            if tot > lam + 1e-12 or any(rate < -1e-12 for _, rate in rows):
                raise AssertionError(f"triple rates invalid at level {level}")
            for ci, single in (
                (0, spec.c1 if minus == 0 else spec.c0 + spec.lam0),
                (1, c),
                (2, spec.c1 + spec.lam1 if plus == 0 else spec.c0),
            ):
                got = sum(
                    rate for tgt, rate in rows
                    if tables.coords_of_level(tgt)[ci]
                    != tables.coords_of_level(level)[ci]
                )
                worst = max(worst, abs(got - single))
    # pair: every copy's marginal equals the triple table, all patch pairs
    pair = tables.pair_tables()
    for (a, b), tab in pair.items():
        for mask, maskp in product(range(n), range(n)):
            if ((mask >> spec.r) & 1) != tables.coords_of_level(a)[1]:
                continue
            if ((maskp >> spec.r) & 1) != tables.coords_of_level(b)[1]:
                continue
            c, cp = spec.rate(mask), spec.rate(maskp)
            rows = [(tgt, e.value(spec, c, cp)) for tgt, e in sorted(tab.items())]
            if any(rate < -1e-12 for _, rate in rows):
                raise AssertionError(f"pair rates negative at {(a, b)}")
            if sum(r for _, r in rows) > lam + 1e-12:
                raise AssertionError(f"pair outflow exceeds bound at {(a, b)}")
            for copy in (0, 1):
                marg: dict[int, float] = {}
                for (ta, tb), rate in rows:
                    tgt = (ta, tb)[copy]
                    if tgt != (a, b)[copy]:
                        marg[tgt] = marg.get(tgt, 0.0) + rate
                cc = c if copy == 0 else cp
                want = {
                    tgt: e.value(spec, cc, cc)
                    for tgt, e in tables.TRIPLE_TABLE[(a, b)[copy]]
                }
                for tgt, v in want.items():
                    worst = max(worst, abs(marg.get(tgt, 0.0) - v))
                for tgt in marg:
                    if tgt not in want:
                        worst = max(worst, abs(marg[tgt]))
    return {"ok": bool(worst <= 1e-9), "max_abs_error": worst}


def _bar_law(spec: RateSpec) -> InitialLaw:
    return InitialLaw.default_for(spec, trap_conditioned=True)


def suite_triple_order(spec: RateSpec, replicas: int, horizon: float, window: int,
                       seed, backend: str = "log") -> dict:
    """Pointwise xi_minus <= xi <= xi_plus at every event, every replica."""
    violations = 0
    for child in replica_children(seed, replicas):
        rng = np.random.default_rng(child)
        cfg = sample_initial(_bar_law(spec), spec, -window, window, rng)
        trip = coupled_triple_evolve(cfg, spec, horizon, rng=rng, backend=backend)
        try:
            trip.check_order()
        except AssertionError:
            violations += 1
    return {"ok": violations == 0, "violations": violations, "replicas": replicas}


def suite_monotonicity(spec: RateSpec, pairs: int, horizon: float, window: int,
                       seed) -> dict:
    """Walks on ordered environments with shared noise never cross.

    Ordered pairs come from the coupled triple's coordinates (minus <=
    mid and mid <= plus), checked exactly at every jump time.
    """
    violations = 0
    aborted = 0
    checked = 0
    for child in replica_children(seed, pairs):
        env_ss, noise_ss = child.spawn(2)
        rng = np.random.default_rng(env_ss)
        cfg = sample_initial(_bar_law(spec), spec, -window, window, rng)
        trip = coupled_triple_evolve(cfg, spec, horizon, rng=rng)
        noise = NoiseStream(noise_ss)
        paths = [run_infty_zero(tr, noise, horizon) for tr in trip]
        if not all(p.ok for p in paths):
            aborted += 1
            continue
        checked += 1
        for a, b in ((0, 1), (1, 2)):
            try:
                assert_path_order(paths[a], paths[b])
            except AssertionError:
                violations += 1
    return {"ok": violations == 0, "violations": violations,
            "pairs_checked": checked, "aborted": aborted}


def suite_sandwich(spec: RateSpec, replicas: int, horizon: float, window: int,
                   seed) -> dict:
    """H- <= Z <= H+ exactly, from one coupled triple per replica."""
    violations = 0
    aborted = 0
    checked = 0
    for child in replica_children(seed, replicas):
        env_ss, noise_ss = child.spawn(2)
        rng = np.random.default_rng(env_ss)
        cfg = sample_initial(_bar_law(spec), spec, -window, window, rng)
        trip = coupled_triple_evolve(cfg, spec, horizon, rng=rng)
        noise = NoiseStream(noise_ss)
        z = run_infty_zero(trip.mid, noise, horizon)
        hplus = run_envelope("+", trip.plus, horizon)
        hminus = run_envelope("-", trip.minus, horizon)
        if not (z.ok and hplus.ok and hminus.ok):
            aborted += 1
            continue
        checked += 1
        try:
            sandwich_check(z, hminus, hplus)
        except AssertionError:
            violations += 1
    return {"ok": violations == 0, "violations": violations,
            "replicas_checked": checked, "aborted": aborted}


def suite_healthy_discrepancy(spec: RateSpec, replicas: int, horizon: float,
                              window: int, seed, L: float) -> dict:
    """Healthy-certifies-equality, conditioned variant, and dominations."""
    v_plain = v_cond = v_dom_hat = v_dom_lcp = 0
    law = InitialLaw("product", spec.equilibrium_density_guess(), 0.0, False)
    bar = _bar_law(spec)
    for child in replica_children(seed, replicas):
        rng = np.random.default_rng(child)
        cfgA = sample_initial(law, spec, -window, window, rng)
        cfgB = sample_initial(law, spec, -window, window, rng)
        log = build_event_log(spec, -window, window, horizon, rng)
        res = run_tcp_with_discrepancy(log, spec, cfgA, cfgB)
        v_plain += len(res["violations"])
        cfgA2 = sample_initial(bar, spec, -window, window, rng)
        cfgB2 = sample_initial(bar, spec, -window, window, rng)
        res2 = run_conditioned_pair(log, spec, cfgA2, cfgB2, L)
        v_cond += len(res2["violations"])
        v_dom_hat += len(res2["domination_violations"])
        _, _, viols = tcp_lcp_coupled(log, spec, rng)
        v_dom_lcp += len(viols)
    return {
        "ok": v_plain == v_cond == v_dom_hat == v_dom_lcp == 0,
        "plain_violations": v_plain,
        "conditioned_violations": v_cond,
        "hat_domination_violations": v_dom_hat,
        "lcp_domination_violations": v_dom_lcp,
        "replicas": replicas,
    }


def suite_backtracking_oracle(spec: RateSpec, replicas: int, horizon: float,
                              window: int, seed, L: float | None = None) -> dict:
    """Small-window equivalence of the TCP with the path-tracing oracle."""
    mismatches = 0
    for child in replica_children(seed, replicas):
        rng = np.random.default_rng(child)
        log = build_event_log(spec, -window, window, horizon, rng)
        check_times = np.linspace(horizon / 4, horizon, 4)
        zeta = run_tcp(log, spec, all_infected(-window, window))
        for t in check_times:
            healthy = np.array(
                [zeta.state(x, t) == 0 for x in range(-window, window + 1)]
            )
            orc = oracle_healthy_set(log, spec, t)
            if not np.array_equal(healthy, orc):
                mismatches += 1
        if L is not None:
            tl = tilde_censored(log, L)
            zhat = run_tcp(tl, spec, hat_infected(-window, window))
            for t in check_times:
                healthy = np.array(
                    [zhat.state(x, t) == 0 for x in range(-window, window + 1)]
                )
                orc = oracle_healthy_set(log, spec, t, wall_L=L)
                if not np.array_equal(healthy, orc):
                    mismatches += 1
    return {"ok": mismatches == 0, "mismatches": mismatches, "replicas": replicas}


def suite_h_stats(spec: RateSpec, model, L_grid, replicas: int, window: int,
                  seed, cone: ConeSpec | None = None,
                  lookahead_factor: float = 10.0, threads: int = 1) -> dict:
    """(H1) exact and (H2)/(H3) statistical over an L-grid.

    H1: zero walk motion on [0,L] whenever the event holds. H2/H3: the
    event probability and the conditional confinement probability carry
    normal-approximation confidence intervals that must exclude 0.
    """
    cone = cone or default_cone(spec)
    out = {"L": [], "gamma_hat": [], "gamma_lo": [], "kappa_hat": [],
           "kappa_lo": [], "h1_violations": 0, "ok": True}
    law = _bar_law(spec)
    ss = np.random.SeedSequence(seed)
    for L in L_grid:
        lookahead = lookahead_factor * L
        horizon = L + lookahead
        res = estimate_speed(
            spec, model, law, horizon, replicas, ss.spawn(1)[0], window,
            method="probe0", L=L, cone=cone, lookahead=lookahead, threads=threads,
        )
        stats = res["probe0"]
        gam = np.array([s["gamma"] for s in stats if s["gamma"] is not None], dtype=bool)
        conf = np.array([s["confined"] for s in stats if s["confined"] is not None], dtype=bool)
        out["h1_violations"] += sum(1 for s in stats if s["h1"] is False)
        g = float(gam.mean()) if len(gam) else 0.0
        g_lo = g - 3.0 * math.sqrt(max(g * (1 - g), 1e-12) / max(len(gam), 1))
        k = float(conf.mean()) if len(conf) else 0.0
        k_lo = k - 3.0 * math.sqrt(max(k * (1 - k), 1e-12) / max(len(conf), 1))
        out["L"].append(L)
        out["gamma_hat"].append(g)
        out["gamma_lo"].append(g_lo)
        out["kappa_hat"].append(k)
        out["kappa_lo"].append(k_lo)
        if not (g_lo > 0 and k_lo > 0):
            out["ok"] = False
    if out["h1_violations"]:
        out["ok"] = False
    return out


def suite_envelope_laws(spec: RateSpec, n_increments: int, seed, window: int,
                        level: float = 0.01, horizon: float = 50.0) -> dict:
    """Equilibrium H+ increment laws: Exp(c1+lambda1) waits (KS) and
    Geometric(1-rho_plus) jumps (chi-square), at the given level."""
    from scipy import stats as sps

    plus_spec = RateSpec.independent_flips(spec.c0, spec.c1 + spec.lam1)
    rho = plus_spec.equilibrium_density_guess()
    law = InitialLaw("product", rho, 0.0, trap_conditioned=True)
    waits: list[np.ndarray] = []
    jumps: list[np.ndarray] = []
    total = 0
    ss = np.random.SeedSequence(seed)
    while total < n_increments:
        rng = np.random.default_rng(ss.spawn(1)[0])
        cfg = sample_initial(law, plus_spec, -4, window, rng)
        env = simulate_env(plus_spec, cfg, horizon, rng)
        h = run_envelope("+", env, horizon)
        if h.n_jumps < 1:
            continue
        ts = np.concatenate([[0.0], h.jump_times])
        xs = np.concatenate([[0], h.positions])
        waits.append(np.diff(ts))
        jumps.append(np.diff(xs))
        total += h.n_jumps
    w = np.concatenate(waits)[:n_increments]
    j = np.concatenate(jumps)[:n_increments].astype(int)
    rate = spec.c1 + spec.lam1
    ks = sps.kstest(w, "expon", args=(0, 1.0 / rate))
    # chi-square against Geometric(1-rho) on {1,2,...} with a lumped tail
    kmax = max(int(np.quantile(j, 0.99)), 3)
    obs = np.bincount(np.minimum(j, kmax + 1), minlength=kmax + 2)[1:]
    p_geom = (1 - rho) * rho ** (np.arange(1, kmax + 1) - 1)
    probs = np.concatenate([p_geom, [rho ** kmax]])
    chi = sps.chisquare(obs, probs * len(j))
    return {
        "ok": bool(ks.pvalue > level and chi.pvalue > level),
        "n_increments": int(len(w)),
        "ks_pvalue": float(ks.pvalue),
        "chi2_pvalue": float(chi.pvalue),
        "wait_rate": rate,
        "jump_success": 1 - rho,
    }


def suite_exchangeability(increments_by_replica, seed, n_perm: int = 500,
                          level: float = 0.01, max_order: int = 4) -> dict:
    """Permutation test: skeleton increments are exchangeable across their
    regeneration ordinal (both displacement and duration coordinates)."""
    rows = []
    for inc in increments_by_replica:
        for k, (dz, dt) in enumerate(inc):
            if k >= max_order:
                break
            rows.append((k, dz, dt))
    if not rows:
        return {"ok": True, "note": "no increments"}
    arr = np.array(rows)
    labels = arr[:, 0].astype(int)
    vals = arr[:, 1:]
    ks = np.unique(labels)
    if len(ks) < 2:
        return {"ok": True, "note": "single ordinal only"}

    def stat(lab):
        s = 0.0
        for coord in (0, 1):
            overall = vals[:, coord].mean()
            for k in ks:
                sel = vals[lab == k, coord]
                s += len(sel) * (sel.mean() - overall) ** 2
        return s

    obs = stat(labels)
    rng = np.random.default_rng(seed)
    perm_ge = 0
    for _ in range(n_perm):
        if stat(rng.permutation(labels)) >= obs:
            perm_ge += 1
    pval = (perm_ge + 1) / (n_perm + 1)
    return {"ok": bool(pval > level), "pvalue": float(pval), "n": int(len(labels))}
