"""Extra randomness consumed by the walks, split over unit time intervals.

Row ``n`` covers either the bit/uniform matrix entries ``u(n, k)`` used
by jumps with ceil(jump time) = n, or the Poisson clock points falling
in ``[n-1, n)``. Every row is generated from its own child seed
``[seed, tag, n]`` so each entry is a pure function of (seed, tag, n, k)
independent of the order in which entries are first requested; replays
and time-shifted replays are exact.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NoiseStream", "ShiftedNoise"]

_TAG_B0 = 0
_TAG_UNIFORM = 1
_TAG_CLOCK = 2
_TAG_MIX = 3

_CHUNK = 64


class NoiseStream:
    """Replayable source of walk randomness (bits, uniforms, clocks)."""

    def __init__(self, seed):
        if isinstance(seed, np.random.SeedSequence):
            self._entropy = tuple(np.atleast_1d(seed.entropy).tolist()) + tuple(
                seed.spawn_key
            )
        elif isinstance(seed, (int, np.integer)):
            self._entropy = (int(seed),)
        else:
            self._entropy = tuple(int(v) for v in seed)
        self._rows: dict[int, np.ndarray] = {}
        self._clocks: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
        self._mix: dict[int, float] = {}
        self._b0 = None

    def _rng(self, *key) -> np.random.Generator:
        return np.random.default_rng(list(self._entropy) + list(key))

    @property
    def u0(self) -> float:
        """Uniform behind the first jump decision."""
        if self._b0 is None:
            self._b0 = float(self._rng(_TAG_B0).random())
        return self._b0

    @property
    def b0(self) -> int:
        """Fair bit used by the first jump functional."""
        return int(self.u0 < 0.5)

    def uniform(self, n: int, k: int) -> float:
        """Entry (n, k) of the jump-decision uniform matrix, n >= 0, k >= 1."""
        row = self._rows.get(n)
        need = k + 1
        if row is None or len(row) < need:
            size = _CHUNK
            while size < need:
                size *= 2
            row = self._rng(_TAG_UNIFORM, n).random(size)
            self._rows[n] = row
        return float(row[k])

    def bit(self, n: int, k: int) -> int:
        """Fair bit b_{n,k}, realized as uniform(n,k) < 1/2."""
        return int(self.uniform(n, k) < 0.5)

    def clock_events(self, tag: int, rate: float, t0: float, t1: float):
        """Poisson(rate) clock points in [t0, t1) with two uniforms each.

        Returns (times, uniforms) where uniforms has shape (len(times), 2);
        points are generated per unit interval so integer time shifts
        reproduce the same suffix.
        """
        if rate <= 0.0 or t1 <= t0:
            return np.zeros(0), np.zeros((0, 2))
        times, us = [], []
        for n in range(int(np.floor(t0)) + 1, int(np.ceil(t1)) + 1):
            key = (tag, n)
            got = self._clocks.get(key)
            if got is None:
                rng = self._rng(_TAG_CLOCK, tag, n)
                cnt = rng.poisson(rate)
                t = np.sort(rng.random(cnt)) + (n - 1)
                u = rng.random((cnt, 2))
                got = (t, u)
                self._clocks[key] = got
            t, u = got
            keep = (t >= t0) & (t < t1)
            times.append(t[keep])
            us.append(u[keep])
        if not times:
            return np.zeros(0), np.zeros((0, 2))
        return np.concatenate(times), np.concatenate(us)

    def mixture_uniform(self, n: int) -> float:
        """Uniform deciding which component acts on [n-1, n)."""
        u = self._mix.get(n)
        if u is None:
            u = float(self._rng(_TAG_MIX, n).random())
            self._mix[n] = u
        return u

    def shift(self, rows: int, cols: int = 0) -> "ShiftedNoise":
        """View re-indexed for a walk restarted at integer time ``rows``.

        ``cols`` is the number of jumps the original walk made before the
        restart (the global jump-ordinal offset of the uniform matrix).
        """
        return ShiftedNoise(self, rows, cols)


class ShiftedNoise:
    """Time/ordinal-shifted view of a NoiseStream (for suffix replays)."""

    def __init__(self, base, rows: int, cols: int):
        self._base = base
        self._rows = rows
        self._cols = cols

    @property
    def u0(self) -> float:
        return self._base.u0

    @property
    def b0(self) -> int:
        return self._base.b0

    def uniform(self, n: int, k: int) -> float:
        return self._base.uniform(n + self._rows, k + self._cols)

    def bit(self, n: int, k: int) -> int:
        return int(self.uniform(n, k) < 0.5)

    def clock_events(self, tag: int, rate: float, t0: float, t1: float):
        t, u = self._base.clock_events(tag, rate, t0 + self._rows, t1 + self._rows)
        return t - self._rows, u

    def mixture_uniform(self, n: int) -> float:
        return self._base.mixture_uniform(n + self._rows)

    def shift(self, rows: int, cols: int = 0) -> "ShiftedNoise":
        return ShiftedNoise(self._base, self._rows + rows, self._cols + cols)
