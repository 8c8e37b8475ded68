"""Experiment runner CLI.

Subcommands: simulate (one replica, dump paths), estimate (speed),
verify (property suites), mixing (Phi/kappa grids), replay (re-run a
manifest and byte-compare the summary). Exit codes: 0 pass, 1 acceptance
failure, 2 config error, 3 runtime overrun.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    check_speed_bounds,
    estimate_speed,
    lipschitz_coupling_experiment,
    mixing_decay_experiment,
    run_replica,
)
from .config import ConfigError, ExperimentConfig
from .kernels import BACKEND

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_OVERRUN = 3


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _write(outdir: Path, name: str, text: str) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    path.write_text(text)
    return path


def _finish(outdir: Path, cfg: ExperimentConfig, summary: dict) -> str:
    text = _canonical_json(summary)
    _write(outdir, "summary.json", text)
    manifest = {
        "config": cfg.to_dict(),
        "config_sha256": cfg.sha256(),
        "summary_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "package_version": __version__,
        "kernel_backend": BACKEND,
    }
    _write(outdir, "manifest.json", _canonical_json(manifest))
    return text


def run_estimate(cfg: ExperimentConfig, outdir: Path, quiet: bool = False) -> int:
    res = estimate_speed(
        cfg.env, cfg.model, cfg.init, cfg.horizon, cfg.replicas, cfg.seed,
        cfg.window, method=cfg.method, L=cfg.L, cone=cfg.cone, t0=cfg.t0,
        lookahead=cfg.lookahead, threads=cfg.threads,
    )
    summary: dict = {
        "kind": "estimate",
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "estimates": {},
        "overrun_rate": res["overruns"] / cfg.replicas,
        "simultaneous": res["simultaneous"],
    }
    rc = EXIT_OK
    for key in ("direct", "skeleton"):
        if key in res:
            summary["estimates"][key] = res[key].to_dict()
    if cfg.check_bounds:
        est = res.get("direct") or res.get("skeleton")
        verdict = check_speed_bounds(cfg.env, est)
        summary["bounds"] = verdict
        if not verdict["ok"]:
            rc = EXIT_FAIL
    if "direct" in res and "skeleton" in res:
        d, s = res["direct"], res["skeleton"]
        joint = (d.stderr ** 2 + s.stderr ** 2) ** 0.5
        summary["cross_method"] = {
            "difference": d.w_hat - s.w_hat,
            "joint_stderr": joint,
            "agree_3sigma": bool(abs(d.w_hat - s.w_hat) <= 3 * joint),
        }
    if summary["overrun_rate"] > cfg.max_overrun_rate:
        rc = EXIT_OVERRUN
    text = _finish(outdir, cfg, summary)
    if not quiet:
        print(text)
    return rc


def run_simulate(cfg: ExperimentConfig, outdir: Path, quiet: bool = False) -> int:
    child = np.random.SeedSequence(cfg.seed).spawn(1)[0]
    path, data = run_replica(
        child, cfg.env, cfg.init, cfg.model, -cfg.window, cfg.window,
        cfg.horizon, keep_log=True,
    )
    outdir.mkdir(parents=True, exist_ok=True)
    path.to_csv(outdir / "walk.csv")
    (outdir / "walk.json").write_text(path.to_json())
    env = data.env
    with open(outdir / "env_flips.csv", "w") as fh:
        fh.write("time,site,new_state\n")
        for t, x, s in zip(env.flip_t, env.flip_x, env.flip_s):
            fh.write(f"{float(t)!r},{int(x)},{int(s)}\n")
    if data.log is not None:
        data.log.dump(outdir / "event_log.npz")
    summary = {
        "kind": "simulate",
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "walk_status": path.status_name,
        "n_jumps": path.n_jumps,
        "final_position": path.final_position,
        "env_flips": int(env.n_flips),
    }
    text = _finish(outdir, cfg, summary)
    if not quiet:
        print(text)
    return EXIT_OK if path.ok else EXIT_OVERRUN


def run_verify(cfg: ExperimentConfig, outdir: Path, quiet: bool = False) -> int:
    from . import suites

    spec = cfg.env
    suite_cfg = cfg.suite or {"coupling_algebra": True}
    results: dict = {}
    seed = cfg.seed

    def opt(name, **defaults):
        v = suite_cfg.get(name)
        if v is None or v is False:
            return None
        merged = dict(defaults)
        if isinstance(v, dict):
            merged.update(v)
        return merged

    if suite_cfg.get("coupling_algebra"):
        results["coupling_algebra"] = suites.suite_coupling_algebra(spec)
    o = opt("triple_order", replicas=100, horizon=10.0, window=cfg.window)
    if o:
        results["triple_order"] = suites.suite_triple_order(
            spec, int(o["replicas"]), float(o["horizon"]), int(o["window"]), seed
        )
    o = opt("monotonicity", pairs=100, horizon=10.0, window=cfg.window)
    if o:
        results["monotonicity"] = suites.suite_monotonicity(
            spec, int(o["pairs"]), float(o["horizon"]), int(o["window"]), seed + 1
        )
    o = opt("sandwich", replicas=100, horizon=10.0, window=cfg.window)
    if o:
        results["sandwich"] = suites.suite_sandwich(
            spec, int(o["replicas"]), float(o["horizon"]), int(o["window"]), seed + 2
        )
    o = opt("healthy_discrepancy", replicas=50, horizon=8.0, window=20, L=2.0)
    if o:
        results["healthy_discrepancy"] = suites.suite_healthy_discrepancy(
            spec, int(o["replicas"]), float(o["horizon"]), int(o["window"]),
            seed + 3, float(o["L"]),
        )
    o = opt("backtracking_oracle", replicas=30, horizon=4.0, window=4, L=2.0)
    if o:
        results["backtracking_oracle"] = suites.suite_backtracking_oracle(
            spec, int(o["replicas"]), float(o["horizon"]), int(o["window"]),
            seed + 4, float(o["L"]),
        )
    o = opt("h_stats", L_grid=[2.0, 4.0, 8.0], replicas=2000, window=cfg.window)
    if o:
        results["h_stats"] = suites.suite_h_stats(
            spec, cfg.model, [float(v) for v in o["L_grid"]], int(o["replicas"]),
            int(o["window"]), seed + 5, cone=cfg.cone, threads=cfg.threads,
        )
    o = opt("envelope_laws", n_increments=10000, window=400, horizon=50.0)
    if o:
        results["envelope_laws"] = suites.suite_envelope_laws(
            spec, int(o["n_increments"]), seed + 6, int(o["window"]),
            horizon=float(o["horizon"]),
        )
    o = opt("lipschitz", d0=1.0, d1=1.0, delta=0.5, horizon=50.0, replicas=400,
            window=200, n_steps=1)
    if o:
        lip = lipschitz_coupling_experiment(
            float(o["d0"]), float(o["d1"]), float(o["delta"]), float(o["horizon"]),
            int(o["replicas"]), seed + 7, int(o["window"]), int(o["n_steps"]),
            threads=cfg.threads,
        )
        lip["ok"] = bool(lip["bound_ok"] and lip["ordering_violations"] == 0)
        results["lipschitz"] = lip

    ok = all(r.get("ok", True) for r in results.values())
    summary = {
        "kind": "verify",
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "results": results,
        "ok": ok,
    }
    _finish(outdir, cfg, summary)
    if not quiet:
        for name, r in results.items():
            print(f"{'PASS' if r.get('ok', True) else 'FAIL'} {name}")
    return EXIT_OK if ok else EXIT_FAIL


def run_mixing(cfg: ExperimentConfig, outdir: Path, quiet: bool = False) -> int:
    report = mixing_decay_experiment(
        cfg.env, cfg.model, cfg.L_grid, cfg.replicas, cfg.seed, cfg.window,
        cone=cfg.cone, phi_lookahead=cfg.phi_lookahead,
        kappa_lookahead=cfg.kappa_lookahead, threads=cfg.threads,
    )
    summary = {
        "kind": "mixing",
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "report": report,
    }
    text = _finish(outdir, cfg, summary)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "mixing.csv", "w") as fh:
        fh.write("L,phi_hat,gamma_hat,kappa_hat,ratio\n")
        for i, L in enumerate(report["L_grid"]):
            fh.write(
                f"{L},{report['phi'][i]!r},{report['gamma'][i]!r},"
                f"{report['kappa'][i]!r},{report['ratio'][i]!r}\n"
            )
    if not quiet:
        print(text)
    if cfg.assert_decay and not report["strictly_decreasing"]:
        return EXIT_FAIL
    return EXIT_OK


_RUNNERS = {
    "estimate": run_estimate,
    "simulate": run_simulate,
    "verify": run_verify,
    "mixing": run_mixing,
}


def run_config(cfg: ExperimentConfig, outdir, quiet: bool = False) -> int:
    runner = _RUNNERS.get(cfg.kind)
    if runner is None:
        raise ConfigError(f"config kind {cfg.kind!r} has no runner")
    return runner(cfg, Path(outdir), quiet=quiet)


def run_replay(manifest_path, quiet: bool = False) -> int:
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg = ExperimentConfig.from_dict(manifest["config"])
    if cfg.sha256() != manifest["config_sha256"]:
        print("config hash mismatch", file=sys.stderr)
        return EXIT_CONFIG
    with tempfile.TemporaryDirectory() as tmp:
        run_config(cfg, tmp, quiet=True)
        new_text = (Path(tmp) / "summary.json").read_text()
    new_sha = hashlib.sha256(new_text.encode()).hexdigest()
    if new_sha == manifest["summary_sha256"]:
        if not quiet:
            print("replay OK: summary is byte-identical")
        return EXIT_OK
    print("replay MISMATCH: summary differs from the manifest", file=sys.stderr)
    return EXIT_FAIL


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replicas is not None:
        cfg.replicas = args.replicas
    if args.horizon is not None:
        cfg.horizon = args.horizon
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spinwalk",
        description="Monte Carlo experiments for walks in dynamic spin-flip environments",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config JSON")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--replicas", type=int, default=None)
    common.add_argument("--horizon", type=float, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--out", default="out", help="output directory")
    for name in ("simulate", "estimate", "verify", "mixing"):
        sub.add_parser(name, parents=[common]).set_defaults(command_name=name)
    rp = sub.add_parser("replay")
    rp.add_argument("--manifest", required=True)
    rp.set_defaults(command_name="replay")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command_name == "replay":
            return run_replay(args.manifest)
        cfg = _load_config(args)
        if cfg.kind != args.command_name:
            raise ConfigError(
                f"config kind {cfg.kind!r} does not match subcommand "
                f"{args.command_name!r}"
            )
        return run_config(cfg, args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
