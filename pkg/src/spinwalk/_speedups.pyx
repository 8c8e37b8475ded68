# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled replay kernels; exact twins of spinwalk._core_py."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

WALK_OK = 0
WALK_OVERRUN = 1
WALK_SIMULTANEOUS = 2

DEF INF = 1e308


cdef inline Py_ssize_t _upper_bound(const double* arr, Py_ssize_t a, Py_ssize_t b, double t) nogil:
    # first index in [a, b) with arr[idx] > t
    cdef Py_ssize_t mid
    while a < b:
        mid = (a + b) // 2
        if arr[mid] <= t:
            a = mid + 1
        else:
            b = mid
    return a


def evolve_from_log(
    ext_states,
    int r,
    p0,
    p1,
    ev_t,
    ev_xi,
    ev_kind,
    ev_u,
    bint periodic,
    Py_ssize_t n,
):
    cdef cnp.uint8_t[::1] st = np.ascontiguousarray(ext_states, dtype=np.uint8).copy()
    cdef const double[::1] tp0 = np.ascontiguousarray(p0, dtype=np.float64)
    cdef const double[::1] tp1 = np.ascontiguousarray(p1, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(ev_t, dtype=np.float64)
    cdef const cnp.int64_t[::1] xi = np.ascontiguousarray(ev_xi, dtype=np.int64)
    cdef const cnp.uint8_t[::1] kind = np.ascontiguousarray(ev_kind, dtype=np.uint8)
    cdef const double[::1] u = np.ascontiguousarray(ev_u, dtype=np.float64)

    cdef Py_ssize_t cap = t.shape[0]
    out_t_arr = np.empty(cap, dtype=np.float64)
    out_xi_arr = np.empty(cap, dtype=np.int64)
    out_s_arr = np.empty(cap, dtype=np.uint8)
    cdef double[::1] out_t = out_t_arr
    cdef cnp.int64_t[::1] out_xi = out_xi_arr
    cdef cnp.uint8_t[::1] out_s = out_s_arr

    cdef Py_ssize_t off = 0 if periodic else r
    cdef Py_ssize_t i, d, site, m = 0
    cdef Py_ssize_t width = 2 * r + 1
    cdef int j, mask
    cdef double p

    for i in range(cap):
        if kind[i] <= 1:
            j = kind[i]
        else:
            j = kind[i] - 2
            mask = 0
            for d in range(width):
                site = xi[i] - r + d
                if periodic:
                    site = site % n
                    if site < 0:
                        site += n
                mask |= (<int>st[site + off]) << d
            p = tp0[mask] if j == 0 else tp1[mask]
            if not u[i] < p:
                continue
        if st[xi[i] + off] != <cnp.uint8_t>j:
            st[xi[i] + off] = <cnp.uint8_t>j
            out_t[m] = t[i]
            out_xi[m] = xi[i]
            out_s[m] = <cnp.uint8_t>j
            m += 1
    return out_t_arr[:m], out_xi_arr[:m], out_s_arr[:m]


cdef inline int _state_at(
    const cnp.int64_t[::1] ptr, const double* st_t, const cnp.uint8_t[::1] st_s,
    const cnp.uint8_t[::1] init, Py_ssize_t xi, double t,
) nogil:
    cdef Py_ssize_t a = ptr[xi]
    cdef Py_ssize_t b = ptr[xi + 1]
    cdef Py_ssize_t pos = _upper_bound(st_t, a, b, t)
    if pos == a:
        return init[xi]
    return st_s[pos - 1]


cdef inline double _next_flip(
    const cnp.int64_t[::1] ptr, const double* st_t, Py_ssize_t xi, double t,
) nogil:
    cdef Py_ssize_t a = ptr[xi]
    cdef Py_ssize_t b = ptr[xi + 1]
    cdef Py_ssize_t pos = _upper_bound(st_t, a, b, t)
    if pos >= b:
        return INF
    return st_t[pos]


def walk_infty_zero(site_ptr, site_t, site_s, init, long lo, long hi, long x0, double horizon):
    cdef const cnp.int64_t[::1] ptr = np.ascontiguousarray(site_ptr, dtype=np.int64)
    st_t_arr = np.ascontiguousarray(site_t, dtype=np.float64)
    cdef const double[::1] st_t_mv = st_t_arr
    cdef const double* st_t = &st_t_mv[0] if st_t_mv.shape[0] else NULL
    cdef const cnp.uint8_t[::1] st_s = np.ascontiguousarray(site_s, dtype=np.uint8)
    cdef const cnp.uint8_t[::1] ini = np.ascontiguousarray(init, dtype=np.uint8)

    cdef list times = []
    cdef list xs = []
    cdef long x = x0, y
    cdef double t = 0.0, ta, tb, tau
    cdef Py_ssize_t xi, yi
    cdef int sx, sx1, status = WALK_OK

    if x < lo or x + 1 > hi:
        return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN
    while True:
        xi = x - lo
        ta = _next_flip(ptr, st_t, xi, t)
        tb = _next_flip(ptr, st_t, xi + 1, t)
        tau = ta if ta <= tb else tb
        if tau > horizon or tau >= INF:
            break
        sx = _state_at(ptr, st_t, st_s, ini, xi, tau)
        sx1 = _state_at(ptr, st_t, st_s, ini, xi + 1, tau)
        if sx == 1 and sx1 == 1:
            y = x + 1
            while True:
                if y + 1 > hi:
                    return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN
                yi = y - lo
                if (_state_at(ptr, st_t, st_s, ini, yi, tau) == 1
                        and _state_at(ptr, st_t, st_s, ini, yi + 1, tau) == 0):
                    break
                y += 1
        elif sx == 0 and sx1 == 0:
            y = x - 1
            while True:
                if y < lo:
                    return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN
                yi = y - lo
                if (_state_at(ptr, st_t, st_s, ini, yi, tau) == 1
                        and _state_at(ptr, st_t, st_s, ini, yi + 1, tau) == 0):
                    break
                y -= 1
        else:
            return np.array(times), np.array(xs, dtype=np.int64), WALK_SIMULTANEOUS
        x = y
        t = tau
        times.append(tau)
        xs.append(x)
        if x < lo or x + 1 > hi:
            return np.array(times), np.array(xs, dtype=np.int64), WALK_OVERRUN
    return np.array(times), np.array(xs, dtype=np.int64), WALK_OK


def tcp_evolve(inf0, int r, ev_t, ev_xi, ev_kind, bint periodic, Py_ssize_t n):
    cdef cnp.uint8_t[::1] inf = np.ascontiguousarray(inf0, dtype=np.uint8).copy()
    cdef const double[::1] t = np.ascontiguousarray(ev_t, dtype=np.float64)
    cdef const cnp.int64_t[::1] xi = np.ascontiguousarray(ev_xi, dtype=np.int64)
    cdef const cnp.uint8_t[::1] kind = np.ascontiguousarray(ev_kind, dtype=np.uint8)

    cdef Py_ssize_t cap = t.shape[0]
    out_t_arr = np.empty(cap, dtype=np.float64)
    out_xi_arr = np.empty(cap, dtype=np.int64)
    out_s_arr = np.empty(cap, dtype=np.uint8)
    cdef double[::1] out_t = out_t_arr
    cdef cnp.int64_t[::1] out_xi = out_xi_arr
    cdef cnp.uint8_t[::1] out_s = out_s_arr

    cdef Py_ssize_t i, m = 0
    cdef long d, j
    cdef bint found

    for i in range(cap):
        if kind[i] <= 1:
            if inf[xi[i]]:
                inf[xi[i]] = 0
                out_t[m] = t[i]
                out_xi[m] = xi[i]
                out_s[m] = 0
                m += 1
        else:
            found = False
            for d in range(-r, r + 1):
                j = xi[i] + d
                if periodic:
                    j = j % n
                    if j < 0:
                        j += n
                elif j < 0 or j >= n:
                    continue
                if inf[j]:
                    found = True
                    break
            if found and not inf[xi[i]]:
                inf[xi[i]] = 1
                out_t[m] = t[i]
                out_xi[m] = xi[i]
                out_s[m] = 1
                m += 1
    return out_t_arr[:m], out_xi_arr[:m], out_s_arr[:m], np.asarray(inf)
