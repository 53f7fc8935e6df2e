"""Doubling of variables, the matrix sandwich test, and sup/inf-convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .core import GridFn, Jet, SymMatrix, as_symmatrix
from .jets import JetProbeConfig, superjet_test

PENALTY_FORMS = ("half", "full")


@dataclass(frozen=True)
class DoublingResult:
    """Exact argmax of u(x) - v(y) - penalty over all node pairs.

    penalty = (alpha/2)|x-y|^2 ("half" form) or alpha|x-y|^2 ("full").
    M_alpha and penalty are the float values at the argmax, with
    M_alpha == (u(xhat) - v(yhat)) - penalty; M_exact and penalty_exact are
    the same quantities in rational arithmetic on the float inputs.
    """

    alpha: float
    xhat: tuple
    yhat: tuple
    M_alpha: float
    penalty: float
    M_exact: Fraction
    penalty_exact: Fraction
    dist2_exact: Fraction
    form: str = "half"


def _frac_d2(x, y):
    return sum((Fraction(float(a)) - Fraction(float(b))) ** 2 for a, b in zip(x, y))


def doubling_maximize(u: GridFn, v: GridFn, alphas: Sequence[float], form: str = "half") -> List[DoublingResult]:
    """Brute-force doubling maximization along an increasing schedule.

    The float search collects near-maximal pairs and the winner is decided in
    exact rational arithmetic; ties go to the lexicographically smallest
    (x-node, y-node) pair.
    """
    if not u.grid.same_as(v.grid):
        raise ValueError("u and v must share a grid")
    if form not in PENALTY_FORMS:
        raise ValueError(f"form must be one of {PENALTY_FORMS}")
    alphas = [float(a) for a in alphas]
    if any(not a > 0 for a in alphas) or any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be positive and strictly increasing")
    uv = np.asarray(u.values, float).reshape(-1)
    vv = np.asarray(v.values, float).reshape(-1)
    if not (np.all(np.isfinite(uv)) and np.all(np.isfinite(vv))):
        raise ValueError("u and v must be finite")
    grid = u.grid
    pts = grid.points()
    idx = grid.index_array()
    scale = 1.0 + float(np.max(np.abs(uv)) + np.max(np.abs(vv)))
    out = []
    for a in alphas:
        coef = 0.5 * a if form == "half" else a
        tol = 64 * np.finfo(float).eps * (scale + coef * float(np.sum((grid.hi - grid.lo) ** 2)))
        best, bi, bj, ci, cj = kernels.pair_candidates(uv, vv, pts, pts, coef, tol)
        ca = Fraction(coef)
        winner = None
        for i, j in sorted(zip(ci.tolist(), cj.tolist())):
            d2 = _frac_d2(pts[i], pts[j])
            val = Fraction(float(uv[i])) - Fraction(float(vv[j])) - ca * d2
            if winner is None or val > winner[0]:
                winner = (val, i, j, d2)
        val, i, j, d2 = winner
        diff = pts[i] - pts[j]
        d2f = 0.0
        for t in diff:
            d2f = d2f + t * t
        pen = coef * d2f
        M = (uv[i] - vv[j]) - pen
        out.append(
            DoublingResult(
                a,
                tuple(int(k) for k in idx[i]),
                tuple(int(k) for k in idx[j]),
                float(M),
                float(pen),
                val,
                ca * d2,
                d2,
                form,
            )
        )
    return out


def doubling_chain_checks(results: Sequence[DoublingResult]):
    """Exact checks along the schedule.

    Returns a list of dicts per consecutive pair (a, b) with keys
    'nonincreasing' (M_b <= M_a) and, when b == 2a, 'penalty_bound':
    for the full form alpha|x-y|^2 <= 2 (M_{alpha/2} - M_alpha); for the half
    form alpha|x-y|^2 <= 4 (M_{alpha/2} - M_alpha), which is the same
    statement after rescaling alpha.
    """
    rows = []
    for r0, r1 in zip(results, results[1:]):
        row = {"alpha": r1.alpha, "nonincreasing": r1.M_exact <= r0.M_exact}
        if r1.alpha == 2 * r0.alpha:
            k = 2 if r1.form == "full" else 4
            lhs = Fraction(r1.alpha) * r1.dist2_exact
            row["penalty_bound"] = lhs <= k * (r0.M_exact - r1.M_exact)
            row["lhs"] = lhs
            row["rhs"] = k * (r0.M_exact - r1.M_exact)
        rows.append(row)
    return rows


def matrix_doubling_bound_check(X, Y, alpha: float, slack: float = 1e-10) -> bool:
    """-3 alpha I <= diag(X, -Y) <= 3 alpha [[I, -I], [-I, I]] by eigenvalues.

    When both hold, X <= Y follows (test the right inequality on (xi, xi));
    this consequence is asserted.
    """
    X = np.asarray(as_symmatrix(X).entries, float)
    Y = np.asarray(as_symmatrix(Y).entries, float)
    if X.shape != Y.shape:
        raise ValueError("X and Y must have the same dimension")
    n = X.shape[0]
    I = np.eye(n)
    D = np.block([[X, np.zeros((n, n))], [np.zeros((n, n)), -Y]])
    B = np.block([[I, -I], [-I, I]])
    s = slack * max(1.0, alpha, float(np.max(np.abs(D))) if D.size else 1.0)
    left = np.min(np.linalg.eigvalsh(D + 3 * alpha * np.eye(2 * n))) >= -s
    right = np.min(np.linalg.eigvalsh(3 * alpha * B - D)) >= -s
    ok = bool(left and right)
    if ok:
        assert np.max(np.linalg.eigvalsh(X - Y)) <= s, "X <= Y must follow from the sandwich"
    return ok


# ---------------------------------------------------------------------------
# sup / inf convolution
# ---------------------------------------------------------------------------

QUANTUM = 2.0**-30


def _quantize_up(v, q):
    if q is None:
        return np.array(v, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.ceil(np.asarray(v, float) / q) * q
    return np.where(np.isfinite(v), out, v)


@dataclass
class SupConvolution:
    """Grid sup-convolution v_hat(xi) = max_x v(x) - (lambda/2)|x - xi|^2.

    Displacements are k*h in grid-index units.  The per-axis weights
    c_a = lambda h_a^2 / 2 are rounded to multiples of ``quantum`` and the
    source values are rounded up to that quantum, so every candidate value
    is computed without rounding error; ``lam_axes`` holds the effective
    2 c_a / h_a^2.  ``sign`` is -1 for an inf-convolution stored as the
    negated sup-convolution of -v.
    """

    source: GridFn
    lam: float
    result: GridFn
    c: np.ndarray
    lam_axes: np.ndarray
    quantized: np.ndarray
    reach: np.ndarray
    sign: int = 1
    quantum: Optional[float] = QUANTUM


def sup_convolve(v: GridFn, lam: float, quantum: Optional[float] = QUANTUM) -> SupConvolution:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    vals = np.asarray(v.values, float)
    if np.any(vals == np.inf) or np.any(np.isnan(vals)):
        raise ValueError("v must be bounded above")
    fin = np.isfinite(vals)
    if not np.any(fin):
        raise ValueError("v is -inf everywhere")
    grid = v.grid
    h = grid.h
    c = lam * h * h / 2.0
    if quantum is not None:
        c = np.maximum(np.round(c / quantum), 1.0) * quantum
    q = _quantize_up(vals, quantum)
    osc = float(np.max(q[fin]) - np.min(q[fin]))
    # |k| beyond sqrt(osc / c) cannot beat k = 0; one extra cell of margin
    reach = np.array([int(math.floor(math.sqrt(osc / ca))) + 1 for ca in c])
    w = q
    for a in range(grid.dim):
        moved = np.moveaxis(w, a, -1)
        shp = moved.shape
        res, _, _ = kernels.sup_conv_1d(moved.reshape(-1, shp[-1]), float(c[a]), int(reach[a]))
        w = np.moveaxis(res.reshape(shp), -1, a)
    lam_axes = 2.0 * c / (h * h)
    return SupConvolution(v, float(lam), GridFn(grid, w, extended=True), c, lam_axes, q, reach, 1, quantum)


def inf_convolve(v: GridFn, lam: float, quantum: Optional[float] = QUANTUM) -> SupConvolution:
    """v_check = -sup_convolve(-v): the order-dual regularization."""
    neg = GridFn(v.grid, -np.asarray(v.values, float), extended=True)
    sc = sup_convolve(neg, lam, quantum)
    return SupConvolution(v, sc.lam, GridFn(v.grid, -sc.result.values, extended=True), sc.c, sc.lam_axes, -sc.quantized, sc.reach, -1, quantum)


def convexity_defects(sc: SupConvolution):
    """Per axis, interior nodes where v_hat + (lambda/2)|xi|^2 violates the midpoint inequality.

    In index units the test reads v(i+1) + v(i-1) - 2 v(i) >= -2 c_a and is
    evaluated without rounding for quantized inputs.  For inf-convolutions the
    concave counterpart is tested.
    """
    w = sc.result.values * sc.sign
    out = []
    for a in range(w.ndim):
        n = w.shape[a]
        up = np.take(w, range(2, n), axis=a)
        dn = np.take(w, range(0, n - 2), axis=a)
        mid = np.take(w, range(1, n - 1), axis=a)
        second = (up + dn) - 2.0 * mid
        bad = np.isfinite(second) & (second < -2.0 * sc.c[a])
        out.append(np.argwhere(bad))
    return out


@dataclass(frozen=True)
class MagicReport:
    eta: tuple
    y: tuple
    q: np.ndarray
    identity_residual: Fraction
    jet_membership: bool


class NonUniqueMaximizer(ValueError):
    pass


def _argmax_window(sc: SupConvolution, eta):
    grid = sc.source.grid
    vals = sc.quantized * sc.sign
    eta = np.asarray(eta, int)
    lo = np.maximum(eta - sc.reach, 0)
    hi = np.minimum(eta + sc.reach, grid.n - 1)
    sl = tuple(slice(int(a), int(b) + 1) for a, b in zip(lo, hi))
    block = vals[sl]
    ks = np.meshgrid(*[np.arange(int(a), int(b) + 1) - e for a, b, e in zip(lo, hi, eta)], indexing="ij")
    pen = np.zeros(block.shape)
    for a in range(grid.dim):
        pen = pen + sc.c[a] * (ks[a] * ks[a]).astype(float)
    cand = block - pen
    best = np.max(cand)
    winners = np.argwhere(cand == best)
    return best, [tuple(int(x) for x in (w + lo)) for w in winners]


def magic_identity_check(sc: SupConvolution, eta, cfg: Optional[JetProbeConfig] = None) -> MagicReport:
    """Jet transport at the unique maximizer y of v(x) - (lambda/2)|x - eta|^2.

    q = lambda (y - eta); the identity v_hat(eta) + |q|^2/(2 lambda) = v(y) is
    evaluated in rationals, and (q, lambda I) is tested as a discrete superjet
    of v at y.
    """
    if sc.sign != 1:
        raise ValueError("magic_identity_check expects a sup-convolution")
    grid = sc.source.grid
    eta = tuple(int(k) for k in np.atleast_1d(eta))
    if any(k <= 0 or k >= n - 1 for k, n in zip(eta, grid.n)):
        raise ValueError("eta must be an interior node")
    best, winners = _argmax_window(sc, eta)
    if len(winners) != 1:
        raise NonUniqueMaximizer(f"{len(winners)} maximizers at eta={eta}: {winners[:4]}")
    y = winners[0]
    k = np.asarray(y) - np.asarray(eta)
    lam_f = [Fraction(2) * Fraction(float(ca)) / (Fraction(float(ha)) ** 2) for ca, ha in zip(sc.c, grid.h)]
    qf = [la * Fraction(float(ha)) * int(ka) for la, ha, ka in zip(lam_f, grid.h, k)]
    vhat = Fraction(float(sc.result.values[eta]))
    vy = Fraction(float(sc.quantized[y]))
    resid = abs(vhat + sum(qa * qa / (2 * la) for qa, la in zip(qf, lam_f)) - vy)
    q = np.array([float(x) for x in qf])
    lam_mean = float(np.mean(sc.lam_axes))
    src = GridFn(grid, sc.quantized, extended=True)
    member = superjet_test(src, y, Jet(q, SymMatrix.identity(grid.dim, lam_mean)), cfg)
    return MagicReport(eta, y, q, resid, bool(member))
