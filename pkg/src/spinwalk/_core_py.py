"""Pure-Python replay kernels (fallback twins of the compiled core).

Every kernel is a deterministic functional of pre-generated event arrays;
no randomness is drawn here, and the arithmetic is integer comparisons
plus float ordering, so the compiled and pure backends are bit-identical.
"""

from __future__ import annotations

import math

import numpy as np

WALK_OK = 0
WALK_OVERRUN = 1
WALK_SIMULTANEOUS = 2


def evolve_from_log(ext_states, r, p0, p1, ev_t, ev_xi, ev_kind, ev_u, periodic, n):
    """Replay one spin configuration through a graphical-representation log.

    ``ext_states``: window states, plus frozen ghost fringes of width r on
    each side unless ``periodic``. ``ev_xi`` are window-relative sites.
    Returns (flip_t, flip_xi, flip_s) in event order.
    """
    st = ext_states.copy()
    off = 0 if periodic else r
    cap = len(ev_t)
    out_t = np.empty(cap)
    out_xi = np.empty(cap, dtype=np.int64)
    out_s = np.empty(cap, dtype=np.uint8)
    m = 0
    width = 2 * r + 1
    for i in range(cap):
        xi = ev_xi[i]
        k = ev_kind[i]
        if k <= 1:
            j = k
        else:
            j = k - 2
            mask = 0
            for d in range(width):
                site = xi - r + d
                if periodic:
                    site %= n
                mask |= int(st[site + off]) << d
            p = p0[mask] if j == 0 else p1[mask]
            if not ev_u[i] < p:
                continue
        if st[xi + off] != j:
            st[xi + off] = j
            out_t[m] = ev_t[i]
            out_xi[m] = xi
            out_s[m] = j
            m += 1
    return out_t[:m], out_xi[:m], out_s[:m]


def _state_at(site_ptr, site_t, site_s, init, xi, t):
    a, b = site_ptr[xi], site_ptr[xi + 1]
    pos = np.searchsorted(site_t[a:b], t, side="right")
    if pos == 0:
        return init[xi]
    return site_s[a + pos - 1]


def _next_flip(site_ptr, site_t, xi, t):
    a, b = site_ptr[xi], site_ptr[xi + 1]
    pos = np.searchsorted(site_t[a:b], t, side="right")
    if a + pos >= b:
        return math.inf
    return site_t[a + pos]


def walk_infty_zero(site_ptr, site_t, site_s, init, lo, hi, x0, horizon):
    """Replay the trap walk on a flip-indexed environment trajectory.

    The walk starts on a trap at ``x0`` at time 0 and jumps to the nearest
    trap in the direction of the breaking flip. Returns (jump_times,
    positions, status); positions exclude the start.
    """
    x = x0
    t = 0.0
    times, xs = [], []
    if x < lo or x + 1 > hi:
        return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN
    while True:
        xi = x - lo
        ta = _next_flip(site_ptr, site_t, xi, t)
        tb = _next_flip(site_ptr, site_t, xi + 1, t)
        tau = ta if ta <= tb else tb
        if tau > horizon or math.isinf(tau):
            return np.array(times), np.array(xs, dtype=np.int64), WALK_OK
        sx = _state_at(site_ptr, site_t, site_s, init, xi, tau)
        sx1 = _state_at(site_ptr, site_t, site_s, init, xi + 1, tau)
        if sx == 1 and sx1 == 1:
            y = x + 1
            while True:
                if y + 1 > hi:
                    return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN
                yi = y - lo
                if (
                    _state_at(site_ptr, site_t, site_s, init, yi, tau) == 1
                    and _state_at(site_ptr, site_t, site_s, init, yi + 1, tau) == 0
                ):
                    break
                y += 1
        elif sx == 0 and sx1 == 0:
            y = x - 1
            while True:
                if y < lo:
                    return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN
                yi = y - lo
                if (
                    _state_at(site_ptr, site_t, site_s, init, yi, tau) == 1
                    and _state_at(site_ptr, site_t, site_s, init, yi + 1, tau) == 0
                ):
                    break
                y -= 1
        else:
            # two flips sharing one float timestamp broke the trap at once
            return np.array(times), np.array(xs, dtype=np.int64), WALK_SIMULTANEOUS
        x = y
        t = tau
        times.append(tau)
        xs.append(x)
        if x < lo or x + 1 > hi:
            return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN


def tcp_evolve(inf0, r, ev_t, ev_xi, ev_kind, periodic, n):
    """Threshold contact process on the log: crosses heal, arrows infect.

    An arrow infects its target iff some site within range r (clamped to
    the window; ghosts are never infected) is infected just before the
    event. Returns (flip_t, flip_xi, flip_s, final_states).
    """
    inf = inf0.copy()
    cap = len(ev_t)
    out_t = np.empty(cap)
    out_xi = np.empty(cap, dtype=np.int64)
    out_s = np.empty(cap, dtype=np.uint8)
    m = 0
    for i in range(cap):
        xi = ev_xi[i]
        if ev_kind[i] <= 1:
            if inf[xi]:
                inf[xi] = 0
                out_t[m] = ev_t[i]
                out_xi[m] = xi
                out_s[m] = 0
                m += 1
        else:
            found = False
            for d in range(-r, r + 1):
                j = xi + d
                if periodic:
                    j %= n
                elif j < 0 or j >= n:
                    continue
                if inf[j]:
                    found = True
                    break
            if found and not inf[xi]:
                inf[xi] = 1
                out_t[m] = ev_t[i]
                out_xi[m] = xi
                out_s[m] = 1
                m += 1
    return out_t[:m], out_xi[:m], out_s[:m], inf
