# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Volterra marching, history sums, Crank-Nicolson sweep."""

import numpy as np
from cython.parallel import prange
from libc.math cimport exp, sqrt, fabs


def march_weighted(double[::1] f, double[:, ::1] GA, double[:, ::1] GB,
                   double[::1] FA, double[::1] FB, double[:, ::1] K, double c,
                   double[::1] extra):
    cdef Py_ssize_t N = GA.shape[0], m = GA.shape[1]
    cdef Py_ssize_t n, j, q
    cdef double H, den
    cdef long fail = -1
    r_arr = np.ones(N + 1)
    Y_arr = np.zeros((N, m))
    cdef double[::1] r = r_arr
    cdef double[:, ::1] Y = Y_arr
    for n in range(1, N + 1):
        H = FA[n - 1] * r[n - 1] + extra[n]
        for j in range(n - 1):
            for q in range(m):
                H += Y[j, q] * K[n - j, q]
        den = f[n] + c * FB[n - 1]
        if den > 0:
            r[n] = (f[n] - c * H) / den
        elif den == 0:
            r[n] = 1.0
        else:
            fail = n
            break
        for q in range(m):
            Y[n - 1, q] = GA[n - 1, q] * r[n - 1] + GB[n - 1, q] * r[n]
    return r_arr, Y_arr, fail


cdef double _decay_sum(double ai, const double* inv, const double* w, Py_ssize_t kmax) noexcept nogil:
    # flat branch-free loop so the compiler can use a vector exp
    cdef Py_ssize_t k
    cdef double s = 0.0
    for k in range(kmax):
        s += w[k] * exp(-ai * inv[k])
    return s


def field_sum(double[::1] a, Py_ssize_t n, double h, double[:, ::1] Y,
              double[::1] xi, double[:, ::1] GFA, double[:, ::1] GFB,
              double[::1] eta, double[::1] r):
    cdef Py_ssize_t nx = a.shape[0], m = xi.shape[0]
    cdef Py_ssize_t i, kmax, lo, hi, mid
    cdef double ai, s
    # history nodes flattened in order of growing 1/tau (xi ascending)
    tau = h * (np.arange(n, 1, -1, dtype=float)[:, None] - np.asarray(xi)[None, :])
    inv_arr = np.ascontiguousarray((1.0 / tau).ravel())
    w_arr = np.ascontiguousarray((np.asarray(Y)[: n - 1] / np.sqrt(tau)).ravel())
    fin_arr = np.ascontiguousarray(np.asarray(GFA)[n - 1] * r[n - 1] + np.asarray(GFB)[n - 1] * r[n])
    finv_arr = np.ascontiguousarray(1.0 / (h * (1.0 - np.asarray(eta))))
    cdef double[::1] inv = inv_arr, w = w_arr, fin = fin_arr, finv = finv_arr
    cdef Py_ssize_t nk = inv.shape[0]
    out_arr = np.zeros(nx)
    cdef double[::1] out = out_arr
    for i in prange(nx, nogil=True, schedule="static"):
        ai = a[i]
        # first flat index whose kernel underflows
        lo = 0
        hi = nk
        while lo < hi:
            mid = (lo + hi) // 2
            if ai * inv[mid] < 745.0:
                lo = mid + 1
            else:
                hi = mid
        kmax = lo
        s = 0.0
        if kmax > 0:
            s = _decay_sum(ai, &inv[0], &w[0], kmax)
        s = s + _decay_sum(ai, &finv[0], &fin[0], m)
        out[i] = s
    return out_arr


def cn_march(double[::1] P0, double r, Py_ssize_t i0, double[::1] sink,
             unsigned char[::1] save, Py_ssize_t n_save):
    cdef Py_ssize_t nx = P0.shape[0], nsteps = sink.shape[0]
    cdef Py_ssize_t i, n, k = 0
    cdef double edge = 0.0, s, w, v
    P_arr = np.array(P0, copy=True)
    d_arr = np.zeros(nx)
    cp_arr = np.zeros(nx)
    out_arr = np.zeros((n_save, nx))
    origin_arr = np.zeros(nsteps + 1)
    total_arr = np.zeros(nsteps + 1)
    cdef double[::1] P = P_arr, d = d_arr, cp = cp_arr, origin = origin_arr, total = total_arr
    cdef double[:, ::1] out = out_arr
    origin[0] = P[i0]
    s = 0.0
    for i in range(nx):
        s += P[i]
    total[0] = s
    if save[0]:
        out[k, :] = P
        k += 1
    for n in range(nsteps):
        for i in range(1, nx - 1):
            d[i] = (1.0 - 2.0 * r) * P[i] + r * (P[i - 1] + P[i + 1])
        d[i0] -= sink[n] * P[i0]
        # Thomas sweep on interior nodes, sub/super diagonal -r
        w = 1.0 + 2.0 * r + (sink[n] if i0 == 1 else 0.0)
        cp[1] = -r / w
        d[1] = d[1] / w
        for i in range(2, nx - 1):
            w = 1.0 + 2.0 * r + (sink[n] if i == i0 else 0.0) + r * cp[i - 1]
            cp[i] = -r / w
            d[i] = (d[i] + r * d[i - 1]) / w
        P[nx - 2] = d[nx - 2]
        for i in range(nx - 3, 0, -1):
            P[i] = d[i] - cp[i] * P[i + 1]
        P[0] = 0.0
        P[nx - 1] = 0.0
        origin[n + 1] = P[i0]
        s = 0.0
        for i in range(nx):
            s += P[i]
        total[n + 1] = s
        v = fabs(P[1]) if fabs(P[1]) > fabs(P[nx - 2]) else fabs(P[nx - 2])
        if v > edge:
            edge = v
        if save[n + 1]:
            out[k, :] = P
            k += 1
    return out_arr, origin_arr, total_arr, edge
