"""Discrete semijet tests and sub/supersolution certification.

A jet (p, X) is a discrete superjet of u at a node x0 when

    u(x) <= u(x0) + <p, x - x0> + 1/2 <X (x - x0), x - x0> + slack |x - x0|^2

for every region node x within the probe radius.  Subjets reverse the
inequality and the sign of the slack term.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .boundary import BoundarySpec, Dirichlet, Oblique, StateConstraint, exterior_normal, face_assignment
from .core import EvaluationError, Grid, GridFn, Jet, OperatorSpec, SymMatrix, as_symmatrix

SIDES = ("sub", "super", "solution")


@dataclass(frozen=True)
class CandidateRule:
    """Finite family of probe jets generated at each node.

    p: per axis, convex combinations (1-t) D^- u + t D^+ u for t in
    ``p_weights`` plus the value 0.  X: the clipped central Hessian and the
    zero matrix, each shifted by k*I for k in ``x_shifts``.  Hessian entries
    are clipped to +-h**(-cap_exponent), which keeps kink curvatures of size
    1/h out of the probe set.
    """

    p_weights: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    include_zero_p: bool = True
    x_shifts: Tuple[float, ...] = (0.0, -1.0, 1.0, -2.0, 2.0)
    cap_exponent: float = 0.5

    def count(self, dim):
        per_axis = len(self.p_weights) + (1 if self.include_zero_p else 0)
        return per_axis**dim * 2 * len(self.x_shifts)


@dataclass(frozen=True)
class JetProbeConfig:
    """radius: touching-ball radius; slack: quadratic remainder margin.

    ``None`` means the grid default: radius = 2 max(h), slack = max(1e-6, max(h)).
    """

    radius: Optional[float] = None
    slack: Optional[float] = None
    candidates: CandidateRule = field(default_factory=CandidateRule)

    def __post_init__(self):
        if self.slack is not None and self.slack < 0:
            raise ValueError("slack must be nonnegative")

    def resolve(self, grid: Grid):
        hmax = float(np.max(grid.h))
        radius = 2.0 * hmax if self.radius is None else float(self.radius)
        slack = max(1e-6, hmax) if self.slack is None else float(self.slack)
        if radius < hmax:
            raise ValueError(f"probe radius {radius} is smaller than one grid cell ({hmax})")
        return radius, slack


@dataclass
class CertReport:
    verdict: str
    failures: List[tuple]
    tested_nodes: int
    jets_per_node: int
    side: str = "solution"

    @property
    def passed(self):
        return self.verdict == "pass"


# ---------------------------------------------------------------------------
# touching tests
# ---------------------------------------------------------------------------


def probe_offsets(grid: Grid, radius):
    """Integer offsets o != 0 with |o * h| <= radius."""
    k = np.floor(radius / grid.h + 1e-9).astype(int)
    ranges = [np.arange(-ka, ka + 1) for ka in k]
    offs = np.array(list(itertools.product(*ranges)), dtype=int).reshape(-1, grid.dim)
    d2 = np.sum((offs * grid.h) ** 2, axis=1)
    keep = (d2 <= radius * radius * (1 + 1e-12)) & np.any(offs != 0, axis=1)
    return offs[keep]


def _region_mask(grid, region):
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    m = np.asarray(region, dtype=bool)
    if m.shape != grid.shape:
        raise ValueError("region mask must have the grid shape")
    return m


def _neighbors(grid, nodes, offs, region):
    """Neighbor multi-indices (K,O,N), validity mask (K,O) and displacements (K,O,N)."""
    nb = nodes[:, None, :] + offs[None, :, :]
    ok = np.all((nb >= 0) & (nb < grid.n), axis=2)
    nbc = np.where(ok[..., None], nb, 0)
    ok &= region[tuple(nbc[..., a] for a in range(grid.dim))]
    d = np.empty(nb.shape, dtype=float)
    for a in range(grid.dim):
        ax = grid.axes[a]
        d[..., a] = ax[nbc[..., a]] - ax[nodes[:, a]][:, None]
    return nbc, ok, d


def _touch_rhs(u0, p, X, d, slack, sign):
    """((u0 + <p,d>) + 1/2 <Xd,d>) + sign * slack |d|^2 with a fixed summation order.

    Shapes: u0 (K,1,1), p (K,J,1,N), X (K,J,1,N,N), d (K,1,O,N).
    """
    n = d.shape[-1]
    pd = p[..., 0] * d[..., 0]
    for a in range(1, n):
        pd = pd + p[..., a] * d[..., a]
    q = None
    for a in range(n):
        xd = X[..., a, 0] * d[..., 0]
        for b in range(1, n):
            xd = xd + X[..., a, b] * d[..., b]
        term = d[..., a] * xd
        q = term if q is None else q + term
    q = 0.5 * q
    dd = d[..., 0] * d[..., 0]
    for a in range(1, n):
        dd = dd + d[..., a] * d[..., a]
    base = (u0 + pd) + q
    sl = slack * dd
    return base + sl if sign > 0 else base - sl


def _jet_pass(u, nodes, P, XX, cfg, region, kind):
    """Vectorized super/sub test: nodes (K,N), P (K,J,N), XX (K,J,N,N) -> (K,J) bool."""
    grid = u.grid
    radius, slack = cfg.resolve(grid)
    offs = probe_offsets(grid, radius)
    nbc, ok, d = _neighbors(grid, nodes, offs, region)
    vals = u.values
    uk = vals[tuple(nodes[:, a] for a in range(grid.dim))]
    un = vals[tuple(nbc[..., a] for a in range(grid.dim))]
    rhs = _touch_rhs(
        uk[:, None, None], P[:, :, None, :], XX[:, :, None, :, :], d[:, None, :, :], slack, 1 if kind == "super" else -1
    )
    if kind == "super":
        good = un[:, None, :] <= rhs
    else:
        good = un[:, None, :] >= rhs
    good |= ~ok[:, None, :]
    return np.all(good, axis=2)


def _as_node(grid, node):
    node = np.atleast_1d(np.asarray(node, dtype=int))
    if node.shape != (grid.dim,) or np.any(node < 0) or np.any(node >= grid.n):
        raise ValueError(f"node {node.tolist()} is not on the grid")
    return node


def _exact_test(u, node, jet, cfg, region, kind, shift=None):
    grid = u.grid
    radius, slack = cfg.resolve(grid)
    offs = probe_offsets(grid, radius)
    nodes = node[None, :]
    nbc, ok, _ = _neighbors(grid, nodes, offs, region)
    F = Fraction
    x0 = [F(grid.axes[a][node[a]]) for a in range(grid.dim)]
    p = [F(float(v)) for v in jet.p]
    X = [[F(float(v)) for v in row] for row in np.asarray(jet.X.entries)]
    s = F(slack)
    u0 = F(float(u.values[tuple(node)]))
    if shift is not None:
        phi, _ = shift
        u0 -= phi.exact_value(x0)
        g = phi.exact_gradient(x0)
        p = [p[a] - g[a] for a in range(grid.dim)]
        H = phi.exact_hessian()
        X = [[X[a][b] - H[a][b] for b in range(grid.dim)] for a in range(grid.dim)]
    for o in range(offs.shape[0]):
        if not ok[0, o]:
            continue
        idx = tuple(int(v) for v in nbc[0, o])
        xs = [F(grid.axes[a][idx[a]]) for a in range(grid.dim)]
        d = [xs[a] - x0[a] for a in range(grid.dim)]
        ux = F(float(u.values[idx]))
        if shift is not None:
            ux -= shift[0].exact_value(xs)
        rhs = u0 + sum(p[a] * d[a] for a in range(grid.dim))
        rhs += F(1, 2) * sum(d[a] * X[a][b] * d[b] for a in range(grid.dim) for b in range(grid.dim))
        dd = sum(v * v for v in d)
        if kind == "super":
            if ux > rhs + s * dd:
                return False
        else:
            if ux < rhs - s * dd:
                return False
    return True


def superjet_test(u: GridFn, node, jet: Jet, cfg: Optional[JetProbeConfig] = None, region=None, exact=False) -> bool:
    """True iff jet is a discrete superjet of u at node.

    exact=True evaluates the inequalities in rational arithmetic on the
    floating-point inputs.
    """
    cfg = cfg or JetProbeConfig()
    grid = u.grid
    node = _as_node(grid, node)
    region = _region_mask(grid, region)
    if exact:
        return _exact_test(u, node, jet, cfg, region, "super")
    P = np.asarray(jet.p, float)[None, None, :]
    XX = np.asarray(jet.X.entries, float)[None, None, :, :]
    return bool(_jet_pass(u, node[None, :], P, XX, cfg, region, "super")[0, 0])


def subjet_test(u: GridFn, node, jet: Jet, cfg: Optional[JetProbeConfig] = None, region=None, exact=False) -> bool:
    """True iff jet is a discrete subjet of u at node (reversed inequality)."""
    cfg = cfg or JetProbeConfig()
    grid = u.grid
    node = _as_node(grid, node)
    region = _region_mask(grid, region)
    if exact:
        return _exact_test(u, node, jet, cfg, region, "sub")
    P = np.asarray(jet.p, float)[None, None, :]
    XX = np.asarray(jet.X.entries, float)[None, None, :, :]
    return bool(_jet_pass(u, node[None, :], P, XX, cfg, region, "sub")[0, 0])


# ---------------------------------------------------------------------------
# quadratic shifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticPoly:
    """phi(x) = c + <g, x> + 1/2 <H x, x>."""

    c: float
    g: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.g, float))
        H = np.asarray(self.H, float).reshape(g.shape[0], g.shape[0])
        if not np.array_equal(H, H.T):
            raise ValueError("H must be symmetric")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "H", H)

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.c + x @ self.g + 0.5 * np.einsum("...i,ij,...j->...", x, self.H, x)

    def gradient(self, x):
        return self.g + self.H @ np.asarray(x, float)

    def exact_value(self, x):
        F = Fraction
        n = self.g.shape[0]
        v = F(self.c) + sum(F(self.g[a]) * x[a] for a in range(n))
        v += F(1, 2) * sum(x[a] * F(self.H[a, b]) * x[b] for a in range(n) for b in range(n))
        return v

    def exact_gradient(self, x):
        F = Fraction
        n = self.g.shape[0]
        return [F(self.g[a]) + sum(F(self.H[a, b]) * x[b] for b in range(n)) for a in range(n)]

    def exact_hessian(self):
        n = self.g.shape[0]
        return [[Fraction(self.H[a, b]) for b in range(n)] for a in range(n)]


def jet_shift_check(u: GridFn, phi, node, jet: Jet, cfg: Optional[JetProbeConfig] = None, region=None) -> bool:
    """Superjet test of u - phi with the jet shifted by the derivatives of phi.

    Evaluated in rational arithmetic, so it agrees with
    superjet_test(..., exact=True) for every input.
    """
    if not isinstance(phi, QuadraticPoly):
        raise TypeError("phi must be a QuadraticPoly (exactly quadratic)")
    cfg = cfg or JetProbeConfig()
    grid = u.grid
    node = _as_node(grid, node)
    if phi.g.shape[0] != grid.dim:
        raise ValueError("phi dimension mismatch")
    region = _region_mask(grid, region)
    return _exact_test(u, node, jet, cfg, region, "super", shift=(phi, None))


# ---------------------------------------------------------------------------
# candidate jets
# ---------------------------------------------------------------------------


def _one_sided(values, grid):
    """Backward and forward differences per axis, NaN where unavailable."""
    v = values
    dm, dp = [], []
    for a in range(grid.dim):
        h = grid.h[a]
        b = np.full(v.shape, np.nan)
        f = np.full(v.shape, np.nan)
        sl_hi = [slice(None)] * v.ndim
        sl_lo = [slice(None)] * v.ndim
        sl_hi[a] = slice(1, None)
        sl_lo[a] = slice(None, -1)
        diff = (v[tuple(sl_hi)] - v[tuple(sl_lo)]) / h
        b[tuple(sl_hi)] = diff
        f[tuple(sl_lo)] = diff
        dm.append(b)
        dp.append(f)
    return dm, dp


def _central_hessian(values, grid):
    v = values
    n = grid.dim
    H = np.zeros(v.shape + (n, n))
    pad = np.pad(v, 1, mode="edge")
    inner = tuple(slice(1, -1) for _ in range(n))

    def sh(offs):
        sl = tuple(slice(1 + o, pad.shape[a] - 1 + o) for a, o in enumerate(offs))
        return pad[sl]

    for a in range(n):
        e = [0] * n
        e[a] = 1
        em = [0] * n
        em[a] = -1
        H[..., a, a] = ((sh(e) + sh(em)) - 2.0 * v) / grid.h[a] ** 2
        for b in range(a + 1, n):
            pp = [0] * n
            mm = [0] * n
            pm = [0] * n
            mp = [0] * n
            pp[a], pp[b] = 1, 1
            mm[a], mm[b] = -1, -1
            pm[a], pm[b] = 1, -1
            mp[a], mp[b] = -1, 1
            c = ((sh(pp) + sh(mm)) - (sh(pm) + sh(mp))) / (4.0 * grid.h[a] * grid.h[b])
            H[..., a, b] = c
            H[..., b, a] = c
    # one-sided nodes carry no reliable curvature
    bm = grid.boundary_mask()
    H[bm] = 0.0
    return H


def candidate_jets(u: GridFn, nodes, rule: CandidateRule):
    """Probe jets at the given nodes: P (K,J,N) and X (K,J,N,N)."""
    grid = u.grid
    n = grid.dim
    dm, dp = _one_sided(u.values, grid)
    H = _central_hessian(u.values, grid)
    cap = float(np.min(grid.h)) ** (-rule.cap_exponent)
    sel = tuple(nodes[:, a] for a in range(n))
    K = nodes.shape[0]
    per_axis = []
    for a in range(n):
        lo = dm[a][sel]
        hi = dp[a][sel]
        lo_f = np.where(np.isnan(lo), hi, lo)
        hi_f = np.where(np.isnan(hi), lo, hi)
        cand = [(1.0 - t) * lo_f + t * hi_f for t in rule.p_weights]
        if rule.include_zero_p:
            cand.append(np.zeros(K))
        per_axis.append(np.stack(cand, axis=1))
    npa = per_axis[0].shape[1]
    combos = list(itertools.product(range(npa), repeat=n))
    Pset = np.stack([np.stack([per_axis[a][:, c[a]] for a in range(n)], axis=1) for c in combos], axis=1)
    Hk = np.clip(H[sel], -cap, cap)
    I = np.eye(n)
    bases = [Hk, np.zeros_like(Hk)]
    Xset = np.stack([b + k * I for b in bases for k in rule.x_shifts], axis=1)
    J = Pset.shape[1] * Xset.shape[1]
    P = np.repeat(Pset, Xset.shape[1], axis=1)
    XX = np.tile(Xset, (1, Pset.shape[1], 1, 1))
    assert P.shape[1] == J
    return P, XX


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def _strong_gradient(values, grid, node, axis_in, side_in):
    """Gradient at a boundary node with inward one-sided difference on the normal axis."""
    dm, dp = _one_sided(values, grid)
    sel = tuple(int(i) for i in node)
    g = np.zeros(grid.dim)
    for a in range(grid.dim):
        lo, hi = dm[a][sel], dp[a][sel]
        if a == axis_in:
            g[a] = hi if side_in == 0 else lo
        elif np.isnan(lo):
            g[a] = hi
        elif np.isnan(hi):
            g[a] = lo
        else:
            g[a] = 0.5 * (lo + hi)
    return g


def certify(
    u: GridFn,
    op: OperatorSpec,
    region=None,
    side: str = "solution",
    bc: Optional[BoundarySpec] = None,
    cfg: Optional[JetProbeConfig] = None,
    tol: Optional[float] = None,
    chunk: int = 4096,
) -> CertReport:
    """Check the viscosity sub/supersolution inequalities on probe jets.

    Without bc only nodes with a full stencil inside the grid are tested.
    With bc the boundary nodes are tested according to their face
    condition and sense.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    if side == "solution":
        a = certify(u, op, region, "sub", bc, cfg, tol, chunk)
        b = certify(u, op, region, "super", bc, cfg, tol, chunk)
        fails = sorted(a.failures + b.failures, key=lambda f: tuple(f[0]))
        return CertReport("pass" if not fails else "fail", fails, a.tested_nodes, a.jets_per_node, "solution")
    if u.extended or not np.all(np.isfinite(u.values)):
        raise ValueError("certify needs finite values")
    cfg = cfg or JetProbeConfig()
    grid = u.grid
    if grid.dim != op.dim:
        raise ValueError("grid and operator dimensions differ")
    rmask = _region_mask(grid, region)
    J = cfg.candidates.count(grid.dim)
    if J == 0:
        raise ValueError("empty probe set")
    owner = face_assignment(grid).reshape(grid.shape)
    if bc is not None:
        bc.validate(grid)
        test_mask = rmask.copy()
    else:
        test_mask = rmask & (owner < 0)
    nodes = np.argwhere(test_mask)
    kind = "super" if side == "sub" else "sub"
    pts_all = grid.coords()
    results = []
    for start in range(0, nodes.shape[0], max(1, chunk // J)):
        nd = nodes[start : start + max(1, chunk // J)]
        P, XX = candidate_jets(u, nd, cfg.candidates)
        ok = _jet_pass(u, nd, P, XX, cfg, rmask, kind)
        sel = tuple(nd[:, a] for a in range(grid.dim))
        x = np.repeat(pts_all[sel], P.shape[1], axis=0)
        r = np.repeat(u.values[sel], P.shape[1])
        Fv = op.evaluate(x, r, P.reshape(-1, grid.dim), XX.reshape(-1, grid.dim, grid.dim))
        Fv = np.asarray(Fv, float).reshape(P.shape[0], P.shape[1])
        if not np.all(np.isfinite(Fv[ok])):
            k, j = np.argwhere(ok & ~np.isfinite(Fv))[0]
            raise EvaluationError("non-finite F in certification", {"node": nd[k].tolist()})
        results.append((nd, P, XX, ok, Fv))

    scale = 1.0
    for nd, P, XX, ok, Fv in results:
        if ok.any():
            scale = max(scale, 1.0 + float(np.max(np.abs(Fv[ok]))))
    tol_eff = 1e-9 * scale if tol is None else float(tol)

    failures = []
    for nd, P, XX, ok, Fv in results:
        for k in range(nd.shape[0]):
            node = tuple(int(v) for v in nd[k])
            face = owner[node]
            cond = None
            if face >= 0 and bc is not None:
                cond = bc.condition(face // 2, face % 2)
            x = pts_all[node]
            if cond is not None and cond.sense == "strong" and not isinstance(cond, StateConstraint):
                B = _strong_value(u, grid, node, x, cond, face)
                bad = B > tol_eff if side == "sub" else B < -tol_eff
                if bad:
                    failures.append((node, Jet(np.zeros(grid.dim), np.zeros((grid.dim, grid.dim))), float(B)))
                continue
            if isinstance(cond, StateConstraint) and side == "sub":
                continue
            okk = ok[k]
            if not okk.any():
                continue
            vals = Fv[k].copy()
            if cond is not None and not isinstance(cond, StateConstraint):
                Bv = _viscosity_B(u, grid, node, x, cond, face, P[k])
                vals = np.minimum(vals, Bv) if side == "sub" else np.maximum(vals, Bv)
            if side == "sub":
                cand = np.where(okk, vals, -np.inf)
                j = int(np.argmax(cand))
                if cand[j] > tol_eff:
                    failures.append((node, Jet(P[k, j], SymMatrix(XX[k, j])), float(cand[j])))
            else:
                cand = np.where(okk, vals, np.inf)
                j = int(np.argmin(cand))
                if cand[j] < -tol_eff:
                    failures.append((node, Jet(P[k, j], SymMatrix(XX[k, j])), float(cand[j])))
    failures.sort(key=lambda f: f[0])
    return CertReport("pass" if not failures else "fail", failures, int(nodes.shape[0]), J, side)


def _strong_value(u, grid, node, x, cond, face):
    axis, sd = face // 2, face % 2
    if isinstance(cond, Dirichlet):
        return float(u.values[node] - cond.data(x[None, :])[0])
    n = exterior_normal(grid.dim, axis, sd)
    g = _strong_gradient(u.values, grid, node, axis, sd)
    nu = cond.direction(x[None, :], n)[0]
    return float(nu @ g - cond.data(x[None, :])[0])


def _viscosity_B(u, grid, node, x, cond, face, P):
    axis, sd = face // 2, face % 2
    if isinstance(cond, Dirichlet):
        return np.full(P.shape[0], float(u.values[node] - cond.data(x[None, :])[0]))
    n = exterior_normal(grid.dim, axis, sd)
    nu = cond.direction(x[None, :], n)[0]
    return P @ nu - cond.data(x[None, :])[0]
