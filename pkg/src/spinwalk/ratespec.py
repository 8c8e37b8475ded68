"""Single-site spin-flip rate specifications and static quantities.

Rates at the origin have the form

    c(eta) = c0 + lambda0 * p0(eta)   if eta(0) = 1   (flip to hole)
    c(eta) = c1 + lambda1 * p1(eta)   if eta(0) = 0   (flip to particle)

with p0, p1 depending on the radius-``r`` patch around the flipping site.
Patches are encoded as bitmasks: bit ``i`` holds the state at offset
``i - r``, so the center site is bit ``r`` and masks run over
``0 .. 2**(2r+1) - 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RateSpec",
    "SpinConfig",
    "InitialLaw",
    "WindowOverrunError",
    "tr_scan",
    "compute_M_epsilon",
    "patch_mask",
]

ENUMERATION_RANGE_CAP = 8  # 2**(2r+1) patches; r beyond this is refused


class WindowOverrunError(Exception):
    """A site outside the simulation window was required."""


def patch_mask(states, center, r, lo=0):
    """Bitmask of the radius-``r`` patch around absolute site ``center``.

    ``states`` is indexed by ``site - lo``. The caller guarantees the
    patch lies inside the array.
    """
    m = 0
    base = center - lo - r
    for i in range(2 * r + 1):
        m |= int(states[base + i]) << i
    return m


@dataclass(frozen=True)
class RateSpec:
    """Translation-invariant bounded spin-flip rates with finite range."""

    c0: float
    c1: float
    lam0: float = 0.0
    lam1: float = 0.0
    r: int = 0
    p0: np.ndarray | None = None
    p1: np.ndarray | None = None

    def __post_init__(self):
        if not (self.c0 > 0 and self.c1 > 0):
            raise ValueError("c0 and c1 must be positive")
        if self.lam0 < 0 or self.lam1 < 0:
            raise ValueError("lambda0 and lambda1 must be nonnegative")
        if self.r < 0:
            raise ValueError("range must be nonnegative")
        n = 1 << (2 * self.r + 1)
        for name in ("p0", "p1"):
            tab = getattr(self, name)
            if tab is None:
                tab = np.zeros(n)
            tab = np.asarray(tab, dtype=np.float64)
            if tab.shape != (n,):
                raise ValueError(f"{name} table must have {n} entries, got {tab.shape}")
            if tab.min() < 0.0 or tab.max() > 1.0:
                raise ValueError(f"{name} values must lie in [0,1]")
            object.__setattr__(self, name, tab)

    # -- derived quantities (section on stochastic domination) --------

    @property
    def independent(self) -> bool:
        return self.lam0 == 0.0 and self.lam1 == 0.0

    @property
    def lam_plus(self) -> float:
        return self.c0 + self.c1 + self.lam1

    @property
    def lam_minus(self) -> float:
        return self.c0 + self.lam0 + self.c1

    @property
    def rho_plus(self) -> float:
        return (self.c1 + self.lam1) / self.lam_plus

    @property
    def rho_minus(self) -> float:
        return self.c1 / self.lam_minus

    @property
    def total_rate_bound(self) -> float:
        """Uniform bound on the total outflow rate of any coupled local state."""
        return self.c0 + self.lam0 + self.c1 + self.lam1

    def rate(self, mask: int) -> float:
        """Flip rate of the center site for patch bitmask ``mask``."""
        if (mask >> self.r) & 1:
            return self.c0 + self.lam0 * float(self.p0[mask])
        return self.c1 + self.lam1 * float(self.p1[mask])

    def equilibrium_density_guess(self) -> float:
        """Product-measure density used by the default initial law."""
        return self.c1 / (self.c0 + self.c1)

    def is_attractive(self) -> bool:
        """True if p1 is nondecreasing and p0 nonincreasing in the patch."""
        n = 1 << (2 * self.r + 1)
        for m in range(n):
            for i in range(2 * self.r + 1):
                if not (m >> i) & 1:
                    up = m | (1 << i)
                    if self.p1[up] < self.p1[m] or self.p0[up] > self.p0[m]:
                        return False
        return True

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "c0": self.c0,
            "c1": self.c1,
            "lambda0": self.lam0,
            "lambda1": self.lam1,
            "range": self.r,
            "p0_table": {str(m): float(v) for m, v in enumerate(self.p0)},
            "p1_table": {str(m): float(v) for m, v in enumerate(self.p1)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RateSpec":
        r = int(d.get("range", 0))
        n = 1 << (2 * r + 1)
        tables = []
        for key in ("p0_table", "p1_table"):
            tab = np.zeros(n)
            for m, v in d.get(key, {}).items():
                m = int(m)
                if not 0 <= m < n:
                    raise ValueError(f"{key} mask {m} out of range for r={r}")
                tab[m] = float(v)
            tables.append(tab)
        return cls(
            c0=float(d["c0"]),
            c1=float(d["c1"]),
            lam0=float(d.get("lambda0", 0.0)),
            lam1=float(d.get("lambda1", 0.0)),
            r=r,
            p0=tables[0],
            p1=tables[1],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "RateSpec":
        return cls.from_dict(json.loads(s))

    @classmethod
    def independent_flips(cls, d0: float, d1: float) -> "RateSpec":
        """Independent spin flips: rate d0 to holes, d1 to particles."""
        return cls(c0=d0, c1=d1)


def compute_M_epsilon(spec: RateSpec) -> tuple[float, float]:
    """Exact (M, epsilon) by exhaustive enumeration over radius-r patches.

    M = sum over x != 0 of sup over patches of |c(eta^x) - c(eta)|,
    epsilon = inf over patches of c(eta) + c(eta^0).
    """
    if spec.r > ENUMERATION_RANGE_CAP:
        raise ValueError(
            f"range {spec.r} exceeds the enumeration cap {ENUMERATION_RANGE_CAP}"
        )
    n = 1 << (2 * spec.r + 1)
    rates = np.array([spec.rate(m) for m in range(n)])
    M = 0.0
    for i in range(2 * spec.r + 1):
        if i == spec.r:
            continue
        flipped = rates[np.arange(n) ^ (1 << i)]
        M += float(np.max(np.abs(flipped - rates)))
    eps = float(np.min(rates + rates[np.arange(n) ^ (1 << spec.r)]))
    return M, eps


@dataclass
class SpinConfig:
    """Binary site states on the window ``lo..hi`` (inclusive).

    ``boundary`` is one of ``"error"``, ``"periodic"`` or ``"frozen"``;
    frozen configs carry ghost fringes of width ``r`` on each side whose
    states never change and are only read by patch evaluation.
    """

    lo: int
    hi: int
    states: np.ndarray
    boundary: str = "error"
    ghost_left: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    ghost_right: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))

    def __post_init__(self):
        self.states = np.ascontiguousarray(self.states, dtype=np.uint8)
        self.ghost_left = np.ascontiguousarray(self.ghost_left, dtype=np.uint8)
        self.ghost_right = np.ascontiguousarray(self.ghost_right, dtype=np.uint8)
        if self.hi < self.lo:
            raise ValueError("hi must be >= lo")
        if self.states.shape != (self.hi - self.lo + 1,):
            raise ValueError("states length must match window")
        for arr in (self.states, self.ghost_left, self.ghost_right):
            if arr.size and (arr.max() > 1):
                raise ValueError("states must be 0/1")
        if self.boundary not in ("error", "periodic", "frozen"):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")

    @property
    def n_sites(self) -> int:
        return self.hi - self.lo + 1

    def state(self, x: int) -> int:
        if self.lo <= x <= self.hi:
            return int(self.states[x - self.lo])
        if self.boundary == "periodic":
            return int(self.states[(x - self.lo) % self.n_sites])
        if self.boundary == "frozen":
            if self.lo - len(self.ghost_left) <= x < self.lo:
                return int(self.ghost_left[x - (self.lo - len(self.ghost_left))])
            if self.hi < x <= self.hi + len(self.ghost_right):
                return int(self.ghost_right[x - self.hi - 1])
        raise WindowOverrunError(f"site {x} outside window [{self.lo},{self.hi}]")

    def extended_states(self, r: int) -> np.ndarray:
        """States over ``lo-r .. hi+r`` (ghosts/wrap resolved), for kernels."""
        if r == 0:
            return self.states.copy()
        if self.boundary == "periodic":
            idx = (np.arange(self.lo - r, self.hi + r + 1) - self.lo) % self.n_sites
            return self.states[idx].astype(np.uint8)
        if self.boundary == "frozen":
            if len(self.ghost_left) < r or len(self.ghost_right) < r:
                raise WindowOverrunError(
                    f"frozen boundary needs ghost fringes of width {r}"
                )
            return np.concatenate(
                [self.ghost_left[len(self.ghost_left) - r:], self.states,
                 self.ghost_right[:r]]
            ).astype(np.uint8)
        raise WindowOverrunError(
            f"boundary policy 'error' cannot resolve patches of radius {r}"
        )

    def in_trap_set(self) -> bool:
        """Trap at the origin: state(0)=1, state(1)=0."""
        return self.state(0) == 1 and self.state(1) == 0

    def with_trap(self) -> "SpinConfig":
        out = self.copy()
        out.states[0 - out.lo] = 1
        out.states[1 - out.lo] = 0
        return out

    def copy(self) -> "SpinConfig":
        return SpinConfig(
            self.lo, self.hi, self.states.copy(), self.boundary,
            self.ghost_left.copy(), self.ghost_right.copy(),
        )


def tr_scan(config: SpinConfig, direction: str) -> int | None:
    """Location of the closest trap (pattern 1,0) at or beyond the origin.

    ``direction`` "+" gives the smallest x >= 0 with state(x)=1,
    state(x+1)=0; "-" the largest x <= 0 with the same pattern. Returns
    None when no trap exists inside the window (the inf-of-empty-set
    convention; callers widen the window or abort).
    """
    if direction == "+":
        for x in range(max(0, config.lo), config.hi):
            if config.states[x - config.lo] == 1 and config.states[x + 1 - config.lo] == 0:
                return x
        return None
    if direction == "-":
        for x in range(min(0, config.hi - 1), config.lo - 1, -1):
            if config.states[x - config.lo] == 1 and config.states[x + 1 - config.lo] == 0:
                return x
        return None
    raise ValueError("direction must be '+' or '-'")


@dataclass(frozen=True)
class InitialLaw:
    """Initial distribution for the environment.

    ``product``: Bernoulli(rho) product measure. ``equilibrium-burnin``:
    product(rho_start) evolved for t_burn under the spec before use.
    ``trap_conditioned`` overwrites sites 0,1 with (1,0) after sampling.
    """

    kind: str = "product"
    rho: float = 0.5
    t_burn: float = 0.0
    trap_conditioned: bool = False

    def __post_init__(self):
        if self.kind not in ("product", "equilibrium-burnin"):
            raise ValueError(f"unknown initial law kind {self.kind!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0,1]")
        if self.t_burn < 0:
            raise ValueError("t_burn must be >= 0")

    @classmethod
    def default_for(cls, spec: RateSpec, trap_conditioned: bool = False) -> "InitialLaw":
        """Product at the guessed density; exact equilibrium iff independent."""
        rho = spec.equilibrium_density_guess()
        if spec.independent:
            return cls("product", rho, 0.0, trap_conditioned)
        return cls("equilibrium-burnin", rho, 20.0 / (spec.c0 + spec.c1), trap_conditioned)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rho": self.rho,
            "t_burn": self.t_burn,
            "trap_conditioned": self.trap_conditioned,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InitialLaw":
        return cls(
            kind=d.get("kind", "product"),
            rho=float(d.get("rho", 0.5)),
            t_burn=float(d.get("t_burn", 0.0)),
            trap_conditioned=bool(d.get("trap_conditioned", False)),
        )
