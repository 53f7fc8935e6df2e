"""Catalog of proper operators and constructors for building new ones."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .core import (
    DefaultSampler,
    EvaluationError,
    Modulus,
    OperatorSpec,
    Quasilinear,
    check_proper,
    random_psd,
)


def _field(f, shape_tail=()):
    """Wrap a constant or callable coefficient as a batched map x (M,N) -> (M, *tail)."""
    if callable(f):

        def call(x):
            v = np.asarray(f(x), dtype=float)
            return np.broadcast_to(v, (x.shape[0],) + shape_tail) if v.shape != (x.shape[0],) + shape_tail else v

        return call
    c = np.asarray(f, dtype=float)

    def const(x):
        return np.broadcast_to(c, (x.shape[0],) + shape_tail)

    return const


def _trace_prod(A, X):
    return np.einsum("mij,mji->m", A, X)


# ---------------------------------------------------------------------------
# linear operators
# ---------------------------------------------------------------------------


@dataclass
class LinearCoefficients:
    """Coefficients of -trace(A(x) X) + <b(x), p> + c(x) r - f(x).

    Each entry is a constant or a batched map of x (M,N).  When Sigma is
    given and A is omitted, A = Sigma^T Sigma.
    """

    dim: int
    A: Optional[Union[Callable, np.ndarray]] = None
    b: Union[Callable, np.ndarray, float] = 0.0
    c: Union[Callable, float] = 0.0
    f: Union[Callable, float] = 0.0
    Sigma: Optional[Union[Callable, np.ndarray]] = None
    L: Optional[float] = None


def _estimate_lipschitz(S, lo, hi, rng, count=2000):
    x = lo + (hi - lo) * rng.random((count, lo.shape[0]))
    y = x + 1e-3 * (hi - lo) * rng.normal(size=x.shape)
    y = np.clip(y, lo, hi)
    dx = np.linalg.norm(x - y, axis=1)
    ok = dx > 0
    dS = np.linalg.norm((S(x) - S(y)).reshape(count, -1), axis=1)
    return float(np.max(dS[ok] / dx[ok])) if ok.any() else 0.0


def make_linear(coef: LinearCoefficients, domain=None, samples=2000, seed=0, name="linear") -> OperatorSpec:
    n = coef.dim
    if domain is None:
        domain = (-np.ones(n), np.ones(n))
    lo, hi = (np.asarray(domain[0], float), np.asarray(domain[1], float))
    rng = np.random.default_rng(seed)
    xs = lo + (hi - lo) * rng.random((samples, n))

    S = _field(coef.Sigma, (n, n)) if coef.Sigma is not None else None
    if coef.A is None:
        if S is None:
            A = _field(np.zeros((n, n)), (n, n))
        else:
            A = lambda x: np.einsum("mki,mkj->mij", S(x), S(x))
    else:
        A = _field(coef.A, (n, n))
    b = _field(coef.b, (n,))
    c = _field(coef.c)
    f = _field(coef.f)

    Ax = np.asarray(A(xs))
    if not np.all(np.isfinite(Ax)):
        raise ValueError("A(x) is not finite on the domain")
    if not np.allclose(Ax, np.swapaxes(Ax, 1, 2), atol=1e-12):
        raise ValueError("A(x) is not symmetric")
    eig = np.linalg.eigvalsh(Ax)
    if np.min(eig) < -1e-10:
        k = int(np.argmin(eig.min(axis=1)))
        raise ValueError(f"A(x) is not positive semidefinite at x = {xs[k].tolist()} (eig {eig[k].tolist()})")
    if S is not None:
        Sx = S(xs)
        err = np.abs(np.einsum("mki,mkj->mij", Sx, Sx) - Ax).max()
        if err > 1e-10:
            raise ValueError(f"Sigma^T Sigma differs from A by {err:.3g}")
    cx = np.asarray(c(xs), float)
    gamma = float(np.min(cx))

    modulus = None
    if S is not None:
        L = coef.L if coef.L is not None else _estimate_lipschitz(S, lo, hi, rng)
        modulus = Modulus("linear", 3.0 * L * L)
    lam_min = float(np.min(eig))
    lam_max = float(np.max(eig))
    ell = (lam_min, lam_max) if lam_min > 0 else None

    def fn(x, r, p, X):
        return -_trace_prod(A(x), X) + np.einsum("mi,mi->m", b(x), p) + c(x) * r - f(x)

    def H(x, r, p):
        return np.einsum("mi,mi->m", b(x), p) + c(x) * r - f(x)

    fo = (coef.A is None and coef.Sigma is None) or not np.any(Ax)
    return OperatorSpec(
        n,
        fn,
        name=name,
        gamma=gamma if gamma >= 0 else None,
        modulus=modulus,
        elliptic_constants=ell,
        first_order_only=bool(fo),
        domain=(lo, hi),
        quasilinear=Quasilinear(lambda x, p: np.asarray(A(x)), H),
        params={"coefficients": coef},
    )


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

COMBINE_MODES = ("sup", "inf", "sup-inf", "inf-sup", "max-with", "min-with")


@dataclass
class OperatorFamily:
    """Finite family of operators and the way they are combined.

    For 'sup' and 'inf' members is a flat list.  For 'sup-inf' and
    'inf-sup' it is a list of lists: sup over the outer index of the inf
    over the inner one (or the reverse).  'max-with' / 'min-with' take the
    pointwise max / min of the first member with the others.
    """

    members: list
    combine: str = "sup"


def _flat(members):
    out = []
    for m in members:
        if isinstance(m, (list, tuple)):
            out.extend(_flat(m))
        else:
            out.append(m)
    return out


def combine(fam: OperatorFamily, name=None) -> OperatorSpec:
    if fam.combine not in COMBINE_MODES:
        raise ValueError(f"combine must be one of {COMBINE_MODES}")
    flat = _flat(fam.members)
    if not flat:
        raise ValueError("empty family")
    dim = flat[0].dim
    if any(m.dim != dim for m in flat):
        raise ValueError("all members must share dim")
    mode = fam.combine
    nested = mode in ("sup-inf", "inf-sup")
    if nested:
        groups = [list(g) if isinstance(g, (list, tuple)) else [g] for g in fam.members]
        if any(not g for g in groups):
            raise ValueError("empty inner family")
    else:
        groups = None

    def reduce(vals, kind):
        out = vals[0]
        for v in vals[1:]:
            out = np.maximum(out, v) if kind == "max" else np.minimum(out, v)
        return out

    def fn(x, r, p, X):
        if nested:
            outer, inner = ("max", "min") if mode == "sup-inf" else ("min", "max")
            vals = [reduce([m.evaluate(x, r, p, X) for m in g], inner) for g in groups]
            return reduce(vals, outer)
        kind = "max" if mode in ("sup", "max-with") else "min"
        return reduce([m.evaluate(x, r, p, X) for m in flat], kind)

    gammas = [m.gamma for m in flat]
    gamma = min(gammas) if all(g is not None for g in gammas) else None
    lo = np.max([m.domain[0] for m in flat], axis=0)
    hi = np.min([m.domain[1] for m in flat], axis=0)
    if len(flat) == 1:
        m = flat[0]
        return m.replace(name=name or m.name)
    return OperatorSpec(
        dim,
        fn,
        name=name or f"{mode}({', '.join(m.name for m in flat)})",
        gamma=gamma,
        first_order_only=all(m.first_order_only for m in flat),
        domain=(lo, hi),
        params={"family": fam},
    )


def make_obstacle(op: OperatorSpec, obstacle, kind="max") -> OperatorSpec:
    """max{F, r - f(x)} (kind='max') or min{F, r - f(x)} (kind='min')."""
    f = _field(obstacle)
    zeroth = OperatorSpec(op.dim, lambda x, r, p, X: r - f(x), name="r-f", gamma=1.0, first_order_only=True, domain=op.domain)
    return combine(OperatorFamily([op, zeroth], "max-with" if kind == "max" else "min-with"), name=f"obstacle-{kind}")


# ---------------------------------------------------------------------------
# eigenvalue operators
# ---------------------------------------------------------------------------


def make_eigenvalue_operator(g: Callable, which: Sequence[int], dim: int, domain=None, check_samples=2000, seed=0, name="eigenvalue"):
    """F(x,r,p,X) = g(x, r, p, -lam_{i1}(X), ..., -lam_{ik}(X)).

    Eigenvalues are sorted increasingly and ``which`` holds 1-based indices.
    g receives the negated eigenvalues as an (M,k) array and must be
    nondecreasing in r and in each of them (checked by sampling).
    """
    which = [int(i) for i in which]
    if not which or any(i < 1 or i > dim for i in which):
        raise ValueError("eigenvalue indices must lie in 1..dim")
    sel = np.array(which) - 1

    def fn(x, r, p, X):
        if not np.all(np.isfinite(X)):
            raise EvaluationError("non-finite matrix passed to the eigen-solver")
        lam = np.linalg.eigvalsh(X)
        return g(x, r, p, -lam[:, sel])

    if domain is None:
        domain = (-np.ones(dim), np.ones(dim))
    rng = np.random.default_rng(seed)
    m = check_samples
    lo, hi = np.asarray(domain[0], float), np.asarray(domain[1], float)
    x = lo + (hi - lo) * rng.random((m, dim))
    r = rng.uniform(-2, 2, m)
    p = rng.normal(size=(m, dim))
    e = rng.normal(size=(m, len(which)))
    base = g(x, r, p, e)
    for k in range(len(which) + 1):
        dr = rng.random(m)
        if k == 0:
            up = g(x, r + dr, p, e)
        else:
            e2 = e.copy()
            e2[:, k - 1] += dr
            up = g(x, r, p, e2)
        if np.any(up < base - 1e-10 * (1 + np.abs(base))):
            raise ValueError("g is not nondecreasing in " + ("r" if k == 0 else f"eigenvalue slot {k}"))
    return OperatorSpec(dim, fn, name=name, domain=domain, params={"eigen_g": g, "eigen_which": tuple(which), "eigen_fn": fn})


def make_max_eigenvalue(dim):
    """F(X) = -lam_N(X)."""
    return make_eigenvalue_operator(lambda x, r, p, m: m[:, 0], [dim], dim, name="max-eigenvalue")


def make_trace_power(dim, m=1.0, q=1.0, c=1.0, f=0.0):
    """-|trace X|^{m-1} trace X + |p|^q + c r - f, via the eigenvalues."""
    ff = _field(f)

    def g(x, r, p, neg):
        s = np.sum(neg, axis=1)
        return np.abs(s) ** (m - 1.0) * s + np.linalg.norm(p, axis=1) ** q + c * r - ff(x)

    op = make_eigenvalue_operator(g, list(range(1, dim + 1)), dim, name="trace-power")
    return op.replace(gamma=c)


# ---------------------------------------------------------------------------
# mean curvature
# ---------------------------------------------------------------------------


def _mcf_numerator(p, X):
    """trace(X)|p|^2 - <Xp,p>, arranged so 2-D evaluation is symmetric under axis swaps."""
    n = p.shape[1]
    if n == 1:
        return np.zeros(p.shape[0])
    if n == 2:
        p1, p2 = p[:, 0], p[:, 1]
        return (p2 * p2 * X[:, 0, 0] + p1 * p1 * X[:, 1, 1]) - 2.0 * (p1 * p2) * X[:, 0, 1]
    sq = p * p
    tot = np.zeros(p.shape[0])
    for i in range(n):
        others = np.sum(np.delete(sq, i, axis=1), axis=1)
        tot = tot + X[:, i, i] * others
    cross = np.zeros(p.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            cross = cross + (p[:, i] * p[:, j]) * X[:, i, j]
    return tot - 2.0 * cross


def mcf_value(p, X, at_zero=0.0):
    """-trace((I - p p^T/|p|^2) X), with the value at_zero (array or scalar) where p = 0."""
    p2 = np.sum(p * p, axis=1)
    num = _mcf_numerator(p, X)
    safe = np.where(p2 > 0, p2, 1.0)
    return np.where(p2 > 0, -num / safe, at_zero)


@dataclass
class MeanCurvatureOps:
    F: OperatorSpec
    F_lower: OperatorSpec
    F_upper: OperatorSpec
    F_mid: OperatorSpec

    def __getitem__(self, key):
        return getattr(self, key)


def _mcf_envelope_factor(dim):
    return 2.0 if dim <= 3 else float(dim - 1)


def make_mean_curvature(dim=2) -> MeanCurvatureOps:
    """Level-set mean curvature operator and its envelopes at p = 0.

    F is undefined (NaN) at p = 0; F_lower / F_upper use -c|X| / +c|X| with
    c = 2 (c = N-1 beyond three dimensions, where 2 is no longer a bound);
    F_mid uses 0.
    """
    c = _mcf_envelope_factor(dim)

    def norm(X):
        return np.max(np.abs(np.linalg.eigvalsh(X)), axis=1)

    def A(x, p):
        p2 = np.sum(p * p, axis=1)
        safe = np.where(p2 > 0, p2, 1.0)
        P = np.eye(dim)[None] - np.einsum("mi,mj->mij", p, p) / safe[:, None, None]
        return np.where((p2 > 0)[:, None, None], P, 0.0)

    ql = Quasilinear(A, lambda x, r, p: np.zeros(x.shape[0]))

    def spec(fn, name):
        # the tag lets schemes use the median-on-a-circle stencil; it is only
        # honoured while fn is unchanged
        return OperatorSpec(dim, fn, name=name, quasilinear=ql, params={"level_set_mcf": fn})

    F = spec(lambda x, r, p, X: mcf_value(p, X, np.nan), "mcf-partial")
    lo = spec(lambda x, r, p, X: mcf_value(p, X, -c * norm(X)), "mcf-lower")
    up = spec(lambda x, r, p, X: mcf_value(p, X, c * norm(X)), "mcf-upper")
    mid = spec(lambda x, r, p, X: mcf_value(p, X, 0.0), "mcf")
    return MeanCurvatureOps(F, lo, up, mid)


# ---------------------------------------------------------------------------
# quasilinear catalog entries
# ---------------------------------------------------------------------------


def make_m_laplace(dim=2, m=3.0, c=1.0, f=0.0):
    """-|p|^{m-2} trace X - (m-2)|p|^{m-4} <Xp,p> + c r - f(x), m >= 2."""
    if m < 2:
        raise ValueError("m >= 2 required for a continuous operator")
    ff = _field(f)

    def A(x, p):
        a = np.linalg.norm(p, axis=1)
        safe = np.where(a > 0, a, 1.0)
        pp = np.einsum("mi,mj->mij", p, p) / (safe * safe)[:, None, None]
        out = (a ** (m - 2.0))[:, None, None] * (np.eye(dim)[None] + (m - 2.0) * pp)
        return np.where((a > 0)[:, None, None], out, (0.0 if m > 2 else 1.0) * np.eye(dim)[None])

    def H(x, r, p):
        return c * r - ff(x)

    def fn(x, r, p, X):
        a = np.linalg.norm(p, axis=1)
        tr = np.trace(X, axis1=1, axis2=2)
        xpp = np.einsum("mi,mij,mj->m", p, X, p)
        safe = np.where(a > 0, a, 1.0)
        second = np.where(a > 0, (m - 2.0) * safe ** (m - 4.0) * xpp, 0.0)
        return -(a ** (m - 2.0)) * tr - second + H(x, r, p)

    return OperatorSpec(dim, fn, name="m-laplace", gamma=c, quasilinear=Quasilinear(A, H), params={"m": m})


def make_minimal_surface(dim=2, c=1.0, f=0.0):
    """-(1+|p|^2)^{-1/2} trace X + (1+|p|^2)^{-3/2} <Xp,p> + c r - f(x)."""
    ff = _field(f)

    def A(x, p):
        w = 1.0 + np.sum(p * p, axis=1)
        pp = np.einsum("mi,mj->mij", p, p)
        return (np.eye(dim)[None] - pp / w[:, None, None]) / np.sqrt(w)[:, None, None]

    def H(x, r, p):
        return c * r - ff(x)

    def fn(x, r, p, X):
        w = 1.0 + np.sum(p * p, axis=1)
        tr = np.trace(X, axis1=1, axis2=2)
        xpp = np.einsum("mi,mij,mj->m", p, X, p)
        return -tr / np.sqrt(w) + xpp / (w * np.sqrt(w)) + H(x, r, p)

    return OperatorSpec(dim, fn, name="minimal-surface", gamma=c, quasilinear=Quasilinear(A, H))


def levi_matrix(p):
    """The degenerate 3x3 coefficient matrix A(p) of the Levi operator."""
    p1, p2, p3 = p[:, 0], p[:, 1], p[:, 2]
    m = p.shape[0]
    A = np.zeros((m, 3, 3))
    A[:, 0, 0] = 1.0 + p3 * p3
    A[:, 1, 1] = 1.0 + p3 * p3
    A[:, 0, 2] = A[:, 2, 0] = p3 * p1 - p2
    A[:, 1, 2] = A[:, 2, 1] = p3 * p2 + p1
    A[:, 2, 2] = p1 * p1 + p2 * p2
    return A


def make_levi(c=0.0, f=0.0):
    """-trace(A(p) X) + c r - f(x) in three dimensions."""
    ff = _field(f)

    def H(x, r, p):
        return c * r - ff(x)

    def fn(x, r, p, X):
        return -_trace_prod(levi_matrix(p), X) + H(x, r, p)

    return OperatorSpec(3, fn, name="levi", gamma=c if c > 0 else 0.0, quasilinear=Quasilinear(lambda x, p: levi_matrix(p), H))


def make_eikonal_plus_u(dim=1, f=1.0):
    """r + |p| - f(x)."""
    ff = _field(f)

    def H(x, r, p):
        return r + np.linalg.norm(p, axis=1) - ff(x)

    return OperatorSpec(
        dim,
        lambda x, r, p, X: H(x, r, p),
        name="eikonal-plus-u",
        gamma=1.0,
        first_order_only=True,
        quasilinear=Quasilinear(lambda x, p: np.zeros((x.shape[0], dim, dim)), H),
    )


def make_heat(dim=1):
    """-trace(X), the spatial part of the heat equation."""
    return make_linear(LinearCoefficients(dim, A=np.eye(dim)), name="heat").replace(gamma=0.0)


# ---------------------------------------------------------------------------
# uniform ellipticity
# ---------------------------------------------------------------------------


def check_uniformly_elliptic(op: OperatorSpec, lam, Lam, sampler=None, count=5000, seed=0) -> bool:
    """Sampled test of lam tr P <= F(X - P) - F(X) <= Lam tr P for P >= 0."""
    if not (lam > 0 and Lam > 0):
        raise ValueError("ellipticity constants must be positive")
    sampler = sampler or DefaultSampler()
    rng = np.random.default_rng(seed)
    b = sampler(rng, count, op)
    P = random_psd(rng, count, op.dim, 2.0)
    f0 = op.evaluate(b["x"], b["r"], b["p"], b["X"])
    f1 = op.evaluate(b["x"], b["r"], b["p"], b["X"] - P)
    if not (np.all(np.isfinite(f0)) and np.all(np.isfinite(f1))):
        raise EvaluationError("non-finite F during ellipticity check")
    scale = 1.0 + float(max(np.max(np.abs(f0)), np.max(np.abs(f1))))
    tr = np.trace(P, axis1=1, axis2=2)
    diff = f1 - f0
    tol = 1e-8 * scale
    return bool(np.all(diff >= lam * tr - tol) and np.all(diff <= Lam * tr + tol))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _linear_default(dim=1, c=1.0, f=0.0):
    return make_linear(LinearCoefficients(dim, A=np.eye(dim), c=c, f=f), name="linear")


def _hjb_default(dim=1):
    ops = []
    for k, s in enumerate((1.0, -1.0)):
        A = np.diag([1.0 if (i + k) % 2 == 0 else 0.5 for i in range(dim)])
        b = np.zeros(dim)
        b[0] = s
        ops.append(make_linear(LinearCoefficients(dim, A=A, b=b, c=1.0, f=1.0), name=f"L{k}"))
    return combine(OperatorFamily(ops, "sup"), name="hjb")


def _isaacs_default(dim=1):
    groups = []
    for a in (1.0, 0.5):
        inner = []
        for s in (1.0, -1.0):
            b = np.zeros(dim)
            b[0] = s
            inner.append(make_linear(LinearCoefficients(dim, A=a * np.eye(dim), b=b, c=1.0, f=1.0)))
        groups.append(inner)
    return combine(OperatorFamily(groups, "sup-inf"), name="isaacs")


def _obstacle_default(dim=1):
    return make_obstacle(_linear_default(dim, f=1.0), lambda x: 0.5 - np.sum(x * x, axis=1), "max")


CATALOG: Dict[str, dict] = {
    "linear": {"factory": _linear_default, "dim": 1},
    "heat": {"factory": make_heat, "dim": 1},
    "hjb": {"factory": _hjb_default, "dim": 1},
    "isaacs": {"factory": _isaacs_default, "dim": 1},
    "obstacle-max": {"factory": _obstacle_default, "dim": 1},
    "mcf": {"factory": lambda dim=2: make_mean_curvature(dim).F_mid, "dim": 2},
    "m-laplace": {"factory": make_m_laplace, "dim": 2},
    "minimal-surface": {"factory": make_minimal_surface, "dim": 2},
    "levi": {"factory": lambda dim=3, **kw: make_levi(**kw), "dim": 3, "fixed_dim": True},
    "eikonal-plus-u": {"factory": make_eikonal_plus_u, "dim": 1},
    "max-eigenvalue": {"factory": make_max_eigenvalue, "dim": 2},
    "trace-power": {"factory": make_trace_power, "dim": 2},
}


def catalog_ids():
    return sorted(CATALOG)


def catalog_operator(id_: str, dim=None, **params) -> OperatorSpec:
    try:
        entry = CATALOG[id_]
    except KeyError:
        raise KeyError(f"unknown operator id {id_!r}; known: {catalog_ids()}") from None
    if dim is None:
        dim = entry["dim"]
    if entry.get("fixed_dim") and dim != entry["dim"]:
        raise ValueError(f"{id_} is only defined in dimension {entry['dim']}")
    return entry["factory"](dim=dim, **params)
