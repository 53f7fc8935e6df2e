"""Pure numpy reference kernels.

Every function here has a compiled twin in _kernels.pyx producing
bit-identical results; the floating-point operation order is part of the
contract.
"""

from __future__ import annotations

import numpy as np


def pair_candidates(u, v, xs, ys, half_alpha, tol, block=512):
    """Maximize (u_i - v_j) - half_alpha * |x_i - y_j|^2 over all pairs.

    Returns (best, i, j, cand_i, cand_j): the float maximum with its first
    maximizer in lexicographic (i, j) order, and every pair whose value is
    at least best - tol.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    m, n = u.shape[0], v.shape[0]
    dim = xs.shape[1]
    best = -np.inf
    bi = bj = -1
    for s in range(0, m, block):
        phi = _phi_block(u[s : s + block], v, xs[s : s + block], ys, half_alpha, dim)
        k = int(np.argmax(phi))
        val = phi.reshape(-1)[k]
        if val > best:
            best = val
            bi, bj = s + k // n, k % n
    ci, cj = [], []
    for s in range(0, m, block):
        phi = _phi_block(u[s : s + block], v, xs[s : s + block], ys, half_alpha, dim)
        a, b = np.nonzero(phi >= best - tol)
        ci.append(a + s)
        cj.append(b)
    return float(best), int(bi), int(bj), np.concatenate(ci), np.concatenate(cj)


def _phi_block(u, v, xs, ys, half_alpha, dim):
    d2 = np.zeros((u.shape[0], v.shape[0]))
    for a in range(dim):
        t = xs[:, a, None] - ys[None, :, a]
        d2 = d2 + t * t
    return (u[:, None] - v[None, :]) - half_alpha * d2


def sup_conv_1d(vals, c, K):
    """Row-wise out[r, i] = max_{|k| <= K} vals[r, i+k] - c k^2.

    Returns (out, arg, count): the maximum, the smallest maximizing index
    and the number of maximizers.  -inf entries never win unless a whole
    window is -inf.
    """
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    rows, n = vals.shape
    out = np.full((rows, n), -np.inf)
    arg = np.full((rows, n), -1, dtype=np.int64)
    cnt = np.zeros((rows, n), dtype=np.int64)
    idx = np.arange(n)
    K = min(int(K), n - 1)
    for k in range(-K, K + 1):
        pen = c * float(k * k)
        j = idx + k
        ok = (j >= 0) & (j < n)
        cand = np.full((rows, n), -np.inf)
        cand[:, ok] = vals[:, j[ok]] - pen
        jj = np.broadcast_to(np.where(ok, j, -1), (rows, n))
        gt = cand > out
        eq = (cand == out) & np.isfinite(cand)
        # windows are scanned with increasing index, so a strict improvement
        # resets the maximizer and ties keep the earlier (smaller) index
        arg = np.where(gt, jj, arg)
        cnt = np.where(gt, 1, np.where(eq, cnt + 1, cnt))
        out = np.where(gt, cand, out)
    return out, arg, cnt


def mcf_step_2d(u, h, dt, eps_p):
    """One explicit step of u_t = |Du| div(Du/|Du|) with boundary values held."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    out = u.copy()
    c = u[1:-1, 1:-1]
    e, w = u[2:, 1:-1], u[:-2, 1:-1]
    nn, s = u[1:-1, 2:], u[1:-1, :-2]
    ux = (e - w) / (2.0 * h)
    uy = (nn - s) / (2.0 * h)
    h2 = h * h
    uxx = ((e + w) - 2.0 * c) / h2
    uyy = ((nn + s) - 2.0 * c) / h2
    uxy = ((u[2:, 2:] + u[:-2, :-2]) - (u[2:, :-2] + u[:-2, 2:])) / (4.0 * h2)
    num = (uy * uy * uxx + ux * ux * uyy) - 2.0 * (ux * uy) * uxy
    den = ux * ux + uy * uy
    small = den <= eps_p * eps_p
    curv = np.where(small, 0.0, num / np.where(small, 1.0, den))
    out[1:-1, 1:-1] = c + dt * curv
    return out


def mcf_step_3d(u, h, dt, eps_p):
    u = np.ascontiguousarray(u, dtype=np.float64)
    out = u.copy()
    I = slice(1, -1)
    c = u[I, I, I]
    h2 = h * h
    sh = {}

    def at(dx, dy, dz):
        key = (dx, dy, dz)
        if key not in sh:
            sl = tuple(slice(1 + d, u.shape[a] - 1 + d) for a, d in enumerate(key))
            sh[key] = u[sl]
        return sh[key]

    g = [
        (at(1, 0, 0) - at(-1, 0, 0)) / (2.0 * h),
        (at(0, 1, 0) - at(0, -1, 0)) / (2.0 * h),
        (at(0, 0, 1) - at(0, 0, -1)) / (2.0 * h),
    ]
    unit = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    D = [[None] * 3 for _ in range(3)]
    for a in range(3):
        e = unit[a]
        m = tuple(-x for x in e)
        D[a][a] = ((at(*e) + at(*m)) - 2.0 * c) / h2
    for a in range(3):
        for b in range(a + 1, 3):
            pp = tuple(unit[a][k] + unit[b][k] for k in range(3))
            mm = tuple(-x for x in pp)
            pm = tuple(unit[a][k] - unit[b][k] for k in range(3))
            mp = tuple(-x for x in pm)
            D[a][b] = D[b][a] = ((at(*pp) + at(*mm)) - (at(*pm) + at(*mp))) / (4.0 * h2)
    den = (g[0] * g[0] + g[1] * g[1]) + g[2] * g[2]
    # |p|^2 tr X - <X p, p>, grouped by diagonal then off-diagonal pairs
    diag = (
        (g[1] * g[1] + g[2] * g[2]) * D[0][0]
        + (g[0] * g[0] + g[2] * g[2]) * D[1][1]
        + (g[0] * g[0] + g[1] * g[1]) * D[2][2]
    )
    off = 2.0 * ((g[0] * g[1]) * D[0][1] + (g[0] * g[2]) * D[0][2] + (g[1] * g[2]) * D[1][2])
    num = diag - off
    small = den <= eps_p * eps_p
    curv = np.where(small, 0.0, num / np.where(small, 1.0, den))
    out[I, I, I] = c + dt * curv
    return out
