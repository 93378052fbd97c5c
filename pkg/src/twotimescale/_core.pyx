# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-slot solvers.

Mirrors ``_pycore`` exactly (same bisection, same auction rounds) so the two
backends agree to rounding.
"""

import numpy as np

from libc.math cimport fabs, log

cdef double LN2 = log(2.0)
cdef int BISECT_MAX = 200


cdef inline double _rate(double a, double b, double lam) nogil:
    cdef double x
    if b <= 0.0:
        return 0.0
    x = b / ((a + lam) * LN2) - 1.0
    return x if x > 0.0 else 0.0


cdef double _block_solve(const double[::1] a, const double[::1] b, double c,
                         double rho, double[::1] out) nogil:
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double a_min = 0.0, top = 0.0, v, s_lo, s_hi, lo, hi, mid, lam, total
    cdef bint any_active = False
    cdef int it
    for i in range(n):
        if b[i] > 0.0:
            v = b[i] / LN2 - a[i]
            if not any_active:
                a_min = a[i]
                top = v
                any_active = True
            else:
                if a[i] < a_min:
                    a_min = a[i]
                if v > top:
                    top = v
    if not any_active:
        for i in range(n):
            out[i] = 0.0
        return 0.0
    s_lo = -a_min / rho - c
    if s_lo < 0.0:
        s_lo = 0.0
    s_hi = top / rho - c
    if s_hi < 0.0:
        s_hi = 0.0
    if s_hi > s_lo:
        lo = s_lo
        hi = s_hi
        for it in range(BISECT_MAX):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            lam = rho * (mid + c)
            if lam <= -a_min:
                lo = mid
                continue
            total = 0.0
            for i in range(n):
                total += _rate(a[i], b[i], lam)
            if total > mid:
                lo = mid
            else:
                hi = mid
        s_hi = hi
    lam = rho * (s_hi + c)
    total = 0.0
    for i in range(n):
        out[i] = _rate(a[i], b[i], lam)
        total += out[i]
    return total


def block_solve(a, b, double c, double rho):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=float)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=float)
    out = np.zeros(av.shape[0])
    cdef double[::1] ov = out
    _block_solve(av, bv, c, rho, ov)
    return out


def admm_solve(a, b, double R, Py_ssize_t split, double rho, double eps_pri,
               double eps_dual, int max_iter, x0, z0, double mu0):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=float)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=float)
    x = np.array(x0, dtype=float)
    z = np.array(z0, dtype=float)
    cdef double[::1] xv = x
    cdef double[::1] zv = z
    rp_trace = np.zeros(max(max_iter, 0))
    rd_trace = np.zeros(max(max_iter, 0))
    cdef double[::1] rpv = rp_trace
    cdef double[::1] rdv = rd_trace
    cdef double mu = mu0, sx = 0.0, sz = 0.0, sz_prev, rp, rd
    cdef Py_ssize_t i
    cdef int it = 0
    cdef bint converged = False
    for i in range(zv.shape[0]):
        sz += zv[i]
    with nogil:
        while it < max_iter:
            sx = _block_solve(av[:split], bv[:split], sz - R + mu, rho, xv)
            sz_prev = sz
            sz = _block_solve(av[split:], bv[split:], sx - R + mu, rho, zv)
            rp = sx + sz - R
            mu += rp
            rd = rho * fabs(sz - sz_prev)
            rpv[it] = fabs(rp)
            rdv[it] = rd
            it += 1
            if fabs(rp) <= eps_pri and rd <= eps_dual:
                converged = True
                break
    return (np.concatenate([x, z]), it, mu, bool(converged),
            rp_trace[:it].copy(), rd_trace[:it].copy())


def demand_sets(f, prices, Py_ssize_t q):
    cdef double[:, ::1] fv = np.ascontiguousarray(f, dtype=float)
    cdef double[::1] pv = np.ascontiguousarray(prices, dtype=float)
    out = np.zeros((fv.shape[0], fv.shape[1]), dtype=np.int8)
    cdef signed char[:, ::1] ov = out
    _demand(fv, pv, q, ov)
    return out


cdef void _demand(const double[:, ::1] f, const double[::1] prices, Py_ssize_t q,
                  signed char[:, ::1] out) nogil:
    # selection of the q best positive-surplus channels; ties -> lower index
    cdef Py_ssize_t n, k, j, best
    cdef Py_ssize_t N = f.shape[0], K = f.shape[1]
    cdef double s, best_s
    for n in range(N):
        for k in range(K):
            out[n, k] = 0
        for j in range(q):
            best = -1
            best_s = 0.0
            for k in range(K):
                if out[n, k]:
                    continue
                s = f[n, k] - prices[k]
                if s > best_s:
                    best_s = s
                    best = k
            if best < 0:
                break
            out[n, best] = 1


def price_auction(f, Py_ssize_t q, double dlam, long max_rounds):
    cdef double[:, ::1] fv = np.ascontiguousarray(f, dtype=float)
    cdef Py_ssize_t N = fv.shape[0], K = fv.shape[1], n, k
    prices = np.zeros(K)
    cdef double[::1] pv = prices
    demand = np.zeros((N, K), dtype=np.int8)
    cdef signed char[:, ::1] dv = demand
    counts = np.zeros(K, dtype=np.int64)
    cdef long long[::1] cv = counts
    cdef long rounds = 0, rises = 0
    cdef bint conflict
    with nogil:
        while True:
            _demand(fv, pv, q, dv)
            conflict = False
            for k in range(K):
                cv[k] = 0
                for n in range(N):
                    cv[k] += dv[n, k]
                if cv[k] > 1:
                    conflict = True
            rounds += 1
            if not conflict or rounds >= max_rounds:
                break
            for k in range(K):
                if cv[k] > 1:
                    pv[k] += dlam
                    rises += 1
    owner = np.full(K, -1, dtype=np.int64)
    for k in range(K):
        if cv[k] == 1:
            for n in range(N):
                if dv[n, k]:
                    owner[k] = n
                    break
    return owner, prices, rounds, rises
