# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; bit-identical twins of _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline double _phi(const double[::1] u, const double[::1] v, const double[:, ::1] xs,
                        const double[:, ::1] ys, double half_alpha, Py_ssize_t i, Py_ssize_t j,
                        Py_ssize_t dim) nogil:
    cdef double d2 = 0.0, t
    cdef Py_ssize_t a
    for a in range(dim):
        t = xs[i, a] - ys[j, a]
        d2 = d2 + t * t
    return (u[i] - v[j]) - half_alpha * d2


def pair_candidates(u, v, xs, ys, double half_alpha, double tol, block=512):
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[:, ::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[:, ::1] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t m = uu.shape[0], n = vv.shape[0], dim = X.shape[1]
    cdef Py_ssize_t i, j, bi = -1, bj = -1, cnt = 0
    cdef double best = -INFINITY, val, thr
    with nogil:
        for i in range(m):
            for j in range(n):
                val = _phi(uu, vv, X, Y, half_alpha, i, j, dim)
                if val > best:
                    best = val
                    bi = i
                    bj = j
        thr = best - tol
        for i in range(m):
            for j in range(n):
                if _phi(uu, vv, X, Y, half_alpha, i, j, dim) >= thr:
                    cnt += 1
    ci = np.empty(cnt, dtype=np.int64)
    cj = np.empty(cnt, dtype=np.int64)
    cdef long long[::1] ci_v = ci
    cdef long long[::1] cj_v = cj
    cdef Py_ssize_t k = 0
    with nogil:
        for i in range(m):
            for j in range(n):
                if _phi(uu, vv, X, Y, half_alpha, i, j, dim) >= thr:
                    ci_v[k] = i
                    cj_v[k] = j
                    k += 1
    return float(best), int(bi), int(bj), ci, cj


def sup_conv_1d(vals, double c, K):
    cdef const double[:, ::1] V = np.ascontiguousarray(vals, dtype=np.float64)
    cdef Py_ssize_t rows = V.shape[0], n = V.shape[1]
    cdef Py_ssize_t KK = min(int(K), n - 1)
    out = np.empty((rows, n), dtype=np.float64)
    arg = np.empty((rows, n), dtype=np.int64)
    cnt = np.empty((rows, n), dtype=np.int64)
    cdef double[:, ::1] O = out
    cdef long long[:, ::1] A = arg
    cdef long long[:, ::1] C = cnt
    cdef Py_ssize_t r, i, k, j
    cdef double best, cand, pen
    cdef long long ba, bc
    with nogil:
        for r in range(rows):
            for i in range(n):
                best = -INFINITY
                ba = -1
                bc = 0
                for k in range(-KK, KK + 1):
                    j = i + k
                    if j < 0 or j >= n:
                        continue
                    pen = c * <double>(k * k)
                    cand = V[r, j] - pen
                    if cand > best:
                        best = cand
                        ba = j
                        bc = 1
                    elif cand == best and cand > -INFINITY:
                        bc += 1
                O[r, i] = best
                A[r, i] = ba
                C[r, i] = bc
    return out, arg, cnt


def mcf_step_2d(u, double h, double dt, double eps_p):
    cdef const double[:, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    out = np.array(U, dtype=np.float64, copy=True)
    cdef double[:, ::1] O = out
    cdef Py_ssize_t nx = U.shape[0], ny = U.shape[1], i, j
    cdef double c, e, w, nn, s, ux, uy, uxx, uyy, uxy, num, den, curv
    cdef double h2 = h * h
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                c = U[i, j]
                e = U[i + 1, j]
                w = U[i - 1, j]
                nn = U[i, j + 1]
                s = U[i, j - 1]
                ux = (e - w) / (2.0 * h)
                uy = (nn - s) / (2.0 * h)
                uxx = ((e + w) - 2.0 * c) / h2
                uyy = ((nn + s) - 2.0 * c) / h2
                uxy = ((U[i + 1, j + 1] + U[i - 1, j - 1]) - (U[i + 1, j - 1] + U[i - 1, j + 1])) / (4.0 * h2)
                num = ((uy * uy) * uxx + (ux * ux) * uyy) - 2.0 * (ux * uy) * uxy
                den = ux * ux + uy * uy
                if den <= eps_p * eps_p:
                    curv = 0.0
                else:
                    curv = num / den
                O[i, j] = c + dt * curv
    return out


def mcf_step_3d(u, double h, double dt, double eps_p):
    cdef const double[:, :, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    out = np.array(U, dtype=np.float64, copy=True)
    cdef double[:, :, ::1] O = out
    cdef Py_ssize_t nx = U.shape[0], ny = U.shape[1], nz = U.shape[2], i, j, k
    cdef double c, g0, g1, g2, d00, d11, d22, d01, d02, d12, den, diag, off, num, curv
    cdef double h2 = h * h
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                for k in range(1, nz - 1):
                    c = U[i, j, k]
                    g0 = (U[i + 1, j, k] - U[i - 1, j, k]) / (2.0 * h)
                    g1 = (U[i, j + 1, k] - U[i, j - 1, k]) / (2.0 * h)
                    g2 = (U[i, j, k + 1] - U[i, j, k - 1]) / (2.0 * h)
                    d00 = ((U[i + 1, j, k] + U[i - 1, j, k]) - 2.0 * c) / h2
                    d11 = ((U[i, j + 1, k] + U[i, j - 1, k]) - 2.0 * c) / h2
                    d22 = ((U[i, j, k + 1] + U[i, j, k - 1]) - 2.0 * c) / h2
                    d01 = ((U[i + 1, j + 1, k] + U[i - 1, j - 1, k]) - (U[i + 1, j - 1, k] + U[i - 1, j + 1, k])) / (4.0 * h2)
                    d02 = ((U[i + 1, j, k + 1] + U[i - 1, j, k - 1]) - (U[i + 1, j, k - 1] + U[i - 1, j, k + 1])) / (4.0 * h2)
                    d12 = ((U[i, j + 1, k + 1] + U[i, j - 1, k - 1]) - (U[i, j + 1, k - 1] + U[i, j - 1, k + 1])) / (4.0 * h2)
                    den = (g0 * g0 + g1 * g1) + g2 * g2
                    diag = ((g1 * g1 + g2 * g2) * d00 + (g0 * g0 + g2 * g2) * d11) + (g0 * g0 + g1 * g1) * d22
                    off = 2.0 * (((g0 * g1) * d01 + (g0 * g2) * d02) + (g1 * g2) * d12)
                    num = diag - off
                    if den <= eps_p * eps_p:
                        curv = 0.0
                    else:
                        curv = num / den
                    O[i, j, k] = c + dt * curv
    return out
