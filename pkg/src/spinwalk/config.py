"""Experiment configuration: strict, versioned JSON schema.

Unknown keys are rejected at every level so a config cannot silently
carry typos; the seed is mandatory (no ambient entropy anywhere).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .envelopes import ConeSpec
from .ratespec import InitialLaw, RateSpec
from .walks import (
    AlphaBeta,
    InftyZero,
    InternalNoise,
    Mixture,
    Pattern,
    PatternExtraJumps,
)

__all__ = ["ExperimentConfig", "ConfigError", "parse_model", "model_to_dict"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration (reported with field paths)."""


def _require_keys(d: dict, allowed: set, path: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")


def parse_model(d: dict, path: str = "model"):
    if not isinstance(d, dict) or "variant" not in d:
        raise ConfigError(f"{path}: need an object with a 'variant' key")
    v = d["variant"]
    try:
        if v == "infty-zero":
            _require_keys(d, {"variant"}, path)
            return InftyZero()
        if v == "alpha-beta":
            _require_keys(d, {"variant", "alpha", "beta"}, path)
            return AlphaBeta(float(d["alpha"]), float(d["beta"]))
        if v == "pattern":
            _require_keys(d, {"variant", "aleph", "q"}, path)
            return Pattern(
                tuple(int(s) for s in d["aleph"]),
                {int(k): float(p) for k, p in d["q"].items()},
            )
        if v == "internal-noise":
            _require_keys(d, {"variant", "pi", "R"}, path)
            pi = {}
            for off, val in d["pi"].items():
                pi[int(off)] = (
                    np.asarray(val, dtype=float) if isinstance(val, list) else float(val)
                )
            return InternalNoise(pi=pi, R=int(d.get("R", 0)))
        if v == "pattern-extra-jumps":
            _require_keys(d, {"variant", "pattern", "noise_rate"}, path)
            return PatternExtraJumps(
                parse_model(d["pattern"], path + ".pattern"),
                float(d["noise_rate"]),
            )
        if v == "mixture":
            _require_keys(d, {"variant", "spec0", "spec1", "p"}, path)
            return Mixture(
                parse_model(d["spec0"], path + ".spec0"),
                parse_model(d["spec1"], path + ".spec1"),
                float(d["p"]),
            )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e
    raise ConfigError(f"{path}: unknown variant {v!r}")


def model_to_dict(model) -> dict:
    if isinstance(model, InftyZero):
        return {"variant": "infty-zero"}
    if isinstance(model, AlphaBeta):
        return {"variant": "alpha-beta", "alpha": model.alpha, "beta": model.beta}
    if isinstance(model, Pattern):
        return {
            "variant": "pattern",
            "aleph": list(model.aleph),
            "q": {str(k): float(v) for k, v in sorted(model.q.items())},
        }
    if isinstance(model, InternalNoise):
        return {
            "variant": "internal-noise",
            "pi": {
                str(o): (v.tolist() if isinstance(v, np.ndarray) else float(v))
                for o, v in sorted(model.pi.items())
            },
            "R": model.R,
        }
    if isinstance(model, PatternExtraJumps):
        return {
            "variant": "pattern-extra-jumps",
            "pattern": model_to_dict(model.pattern),
            "noise_rate": model.noise_rate,
        }
    if isinstance(model, Mixture):
        return {
            "variant": "mixture",
            "spec0": model_to_dict(model.spec0),
            "spec1": model_to_dict(model.spec1),
            "p": model.p,
        }
    raise TypeError(f"unknown model {model!r}")


_TOP_KEYS = {
    "schema_version", "kind", "env", "model", "init", "window", "horizon",
    "replicas", "seed", "method", "L", "L_grid", "cone", "t0", "lookahead",
    "threads", "check_bounds", "max_overrun_rate", "suite", "lipschitz",
    "phi_lookahead", "kappa_lookahead", "box_radius", "description",
    "assert_decay",
}


@dataclass
class ExperimentConfig:
    kind: str
    env: RateSpec
    model: object
    init: InitialLaw
    window: int
    horizon: float
    replicas: int
    seed: int
    method: str = "direct"
    L: float = 1.0
    L_grid: list = field(default_factory=lambda: [2.0, 4.0, 8.0, 16.0])
    cone: ConeSpec | None = None
    t0: float | None = None
    lookahead: float | None = None
    threads: int = 1
    check_bounds: bool = False
    max_overrun_rate: float = 0.05
    suite: dict = field(default_factory=dict)
    lipschitz: dict = field(default_factory=dict)
    phi_lookahead: float = 30.0
    kappa_lookahead: float | None = None
    assert_decay: bool = False
    description: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _require_keys(d, _TOP_KEYS, "config")
        if int(d.get("schema_version", -1)) != SCHEMA_VERSION:
            raise ConfigError(
                f"config.schema_version: expected {SCHEMA_VERSION}"
            )
        for key in ("kind", "env", "seed"):
            if key not in d:
                raise ConfigError(f"config.{key}: required")
        kind = d["kind"]
        if kind not in ("estimate", "verify", "mixing", "simulate", "lipschitz"):
            raise ConfigError(f"config.kind: unknown kind {kind!r}")
        try:
            env = RateSpec.from_dict(d["env"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"config.env: {e}") from e
        model = parse_model(d.get("model", {"variant": "infty-zero"}))
        if "init" in d:
            try:
                init = InitialLaw.from_dict(d["init"])
            except ValueError as e:
                raise ConfigError(f"config.init: {e}") from e
        else:
            init = InitialLaw.default_for(env, trap_conditioned=True)
        replicas = int(d.get("replicas", 0))
        if kind != "simulate" and replicas < 1:
            raise ConfigError("config.replicas: must be >= 1")
        horizon = float(d.get("horizon", 0.0))
        if horizon <= 0:
            raise ConfigError("config.horizon: must be > 0")
        window = int(d.get("window", 0))
        if window < 2:
            raise ConfigError("config.window: must be >= 2")
        method = d.get("method", "direct")
        if method not in ("direct", "skeleton", "both"):
            raise ConfigError(f"config.method: unknown method {method!r}")
        cone = None
        if "cone" in d:
            c = d["cone"]
            _require_keys(c, {"m", "R"}, "config.cone")
            try:
                cone = ConeSpec(float(c["m"]), int(c.get("R", 1)))
            except ValueError as e:
                raise ConfigError(f"config.cone: {e}") from e
        return cls(
            kind=kind, env=env, model=model, init=init, window=window,
            horizon=horizon, replicas=replicas, seed=int(d["seed"]),
            method=method, L=float(d.get("L", 1.0)),
            L_grid=[float(v) for v in d.get("L_grid", [2.0, 4.0, 8.0, 16.0])],
            cone=cone, t0=d.get("t0"), lookahead=d.get("lookahead"),
            threads=int(d.get("threads", 1)),
            check_bounds=bool(d.get("check_bounds", False)),
            max_overrun_rate=float(d.get("max_overrun_rate", 0.05)),
            suite=dict(d.get("suite", {})),
            lipschitz=dict(d.get("lipschitz", {})),
            phi_lookahead=float(d.get("phi_lookahead", 30.0)),
            kappa_lookahead=(
                float(d["kappa_lookahead"]) if "kappa_lookahead" in d else None
            ),
            assert_decay=bool(d.get("assert_decay", False)),
            description=str(d.get("description", "")),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config is not valid JSON: {e}") from e
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "env": self.env.to_dict(),
            "model": model_to_dict(self.model),
            "init": self.init.to_dict(),
            "window": self.window,
            "horizon": self.horizon,
            "replicas": self.replicas,
            "seed": self.seed,
            "method": self.method,
            "L": self.L,
            "L_grid": self.L_grid,
            "threads": self.threads,
            "check_bounds": self.check_bounds,
            "max_overrun_rate": self.max_overrun_rate,
            "phi_lookahead": self.phi_lookahead,
        }
        if self.kappa_lookahead is not None:
            d["kappa_lookahead"] = self.kappa_lookahead
        if self.cone is not None:
            d["cone"] = {"m": self.cone.m, "R": self.cone.R}
        if self.t0 is not None:
            d["t0"] = self.t0
        if self.lookahead is not None:
            d["lookahead"] = self.lookahead
        if self.suite:
            d["suite"] = self.suite
        if self.lipschitz:
            d["lipschitz"] = self.lipschitz
        if self.description:
            d["description"] = self.description
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()
