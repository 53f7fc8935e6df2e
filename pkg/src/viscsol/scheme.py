"""Monotone finite-difference discretization of F(x, u, Du, D^2u) = 0 on a box grid.

Gradient slots are upwinded per node and axis from the sampled sign of
dF/dp_a; slots with mixed sign get a Lax-Friedrichs term.  Diagonal Hessian
entries use central differences and mixed entries use the 7-point stencil
adapted to the sign of the mixed coefficient.  For quasilinear operators
whose coefficient matrix is not diagonally dominant at a node, the second
order part is evaluated along the eigenvectors of A(x, p) with linear
interpolation on a wider stencil instead.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage, sparse

from .boundary import BoundarySpec, Dirichlet, Oblique, StateConstraint, exterior_normal, face_assignment
from .core import Grid, GridFn, OperatorSpec, random_symmetric

NONE, BACK, FWD, LF = 0, 1, 2, 3
CLASS_NAMES = {NONE: "none", BACK: "backward", FWD: "forward", LF: "lax-friedrichs"}


class SchemeError(ValueError):
    pass


class MonotonicityError(SchemeError):
    def __init__(self, message, node=None, offset=None):
        super().__init__(message)
        self.node = node
        self.offset = offset


@dataclass(frozen=True)
class SchemeParams:
    """Scheme construction and iteration parameters.

    tau: scalar damping; None selects nodewise damping tau_i = tau_safety / diag_i
    from the sampled stencil coefficients.  probe_* bound the states (|r|,
    |p_a|, |X_ab|) over which the scheme is built to be monotone.
    """

    tau: Optional[float] = None
    tau_safety: float = 0.9
    max_iter: int = 100_000
    residual_tol: float = 1e-10
    theta_safety: float = 1.25
    probe_r: float = 1.0
    probe_p: float = 2.0
    probe_X: float = 2.0
    probe_count: int = 8
    viscosity_branch: str = "max"
    wide_stencil: Optional[bool] = None
    wide_radius: Optional[float] = None
    median_angles: int = 33
    state_constraint_cells: int = 64
    state_constraint_extent: float = 8.0
    verify_pairs: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.viscosity_branch not in ("max", "min"):
            raise ValueError("viscosity_branch must be 'max' or 'min'")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def _sl(ndim, axis, s):
    out = [slice(None)] * ndim
    out[axis] = s
    return tuple(out)


def one_sided(v, h):
    """Backward and forward differences per axis (NaN where the neighbor is missing)."""
    dm, dp = [], []
    for a in range(v.ndim):
        d = (v[_sl(v.ndim, a, slice(1, None))] - v[_sl(v.ndim, a, slice(None, -1))]) / h[a]
        b = np.full(v.shape, np.nan)
        f = np.full(v.shape, np.nan)
        b[_sl(v.ndim, a, slice(1, None))] = d
        f[_sl(v.ndim, a, slice(None, -1))] = d
        dm.append(b)
        dp.append(f)
    return dm, dp


def _shifted(v, offs):
    """w[i] = v[i + offs] with NaN outside."""
    out = np.full(v.shape, np.nan)
    src, dst = [], []
    for a, o in enumerate(offs):
        n = v.shape[a]
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    out[tuple(dst)] = v[tuple(src)]
    return out


def second_diffs(v, h):
    """Central second differences per axis ((u+ + u-) - 2u) / h^2, NaN at the ends."""
    out = []
    for a in range(v.ndim):
        e = [0] * v.ndim
        e[a] = 1
        m = [0] * v.ndim
        m[a] = -1
        out.append(((_shifted(v, e) + _shifted(v, m)) - 2.0 * v) / (h[a] * h[a]))
    return out


def cross_diffs(v, h, a, b):
    """7-point mixed differences for positive and negative mixed coefficients."""
    n = v.ndim

    def s(oa, ob):
        o = [0] * n
        o[a] = oa
        o[b] = ob
        return _shifted(v, o)

    den = 2.0 * h[a] * h[b]
    pos = ((s(1, 1) - s(1, 0) - s(0, 1) + v) + (s(-1, -1) - s(-1, 0) - s(0, -1) + v)) / den
    neg = -((s(1, -1) - s(1, 0) - s(0, -1) + v) + (s(-1, 1) - s(-1, 0) - s(0, 1) + v)) / den
    return pos, neg


def choose_gradient(cls, dm, dp):
    """Gradient components per class; central for NONE/LF, falling back to what exists."""
    cen = 0.5 * (dm + dp)
    cen = np.where(np.isnan(dm), dp, np.where(np.isnan(dp), dm, cen))
    cen = np.where(np.isnan(cen), 0.0, cen)
    p = np.where(cls == BACK, dm, np.where(cls == FWD, dp, cen))
    return p


def lf_term(cls, theta, dm, dp):
    """Lax-Friedrichs correction sum_a theta_a (D+ - D-)/2 over LF slots."""
    tot = np.zeros(cls.shape[0])
    for a in range(cls.shape[1]):
        d = dp[:, a] - dm[:, a]
        tot = tot + np.where(cls[:, a] == LF, theta[:, a] * (0.5 * d), 0.0)
    return tot


# ---------------------------------------------------------------------------
# scheme map
# ---------------------------------------------------------------------------


def _smooth_state(rng, grid, p_amp, x_amp, modes=3):
    """Random smooth grid function with |Du| <~ p_amp and |D^2u| <~ x_amp."""
    pts = grid.points()
    L = grid.hi - grid.lo
    u = np.zeros(grid.size)
    u += rng.uniform(-1, 1)
    u += pts @ rng.uniform(-0.5, 0.5, grid.dim) * p_amp
    for _ in range(modes):
        k = rng.integers(1, 3, size=grid.dim) * np.pi / L
        ph = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(-1, 1) * x_amp / (2.0 * modes * max(float(k @ k), 1e-12))
        amp = np.clip(amp, -p_amp / (2.0 * modes * np.linalg.norm(k)), p_amp / (2.0 * modes * np.linalg.norm(k)))
        u += amp * np.cos(pts @ k + ph)
    return u.reshape(grid.shape)


class SchemeMap:
    """Nodewise residual R(u) and the Euler map T(u) = u - tau R(u)."""

    def __init__(self, op: OperatorSpec, grid: Grid, bc: Optional[BoundarySpec], params: SchemeParams, classes=None, thetas=None):
        if grid.dim != op.dim:
            raise SchemeError("grid and operator dimensions differ")
        self.op = op
        self.grid = grid
        self.bc = bc.validate(grid) if bc is not None else None
        self.params = params
        self.pts = grid.points()
        self.owner = face_assignment(grid)
        self.idx = grid.index_array()
        self.warnings = []
        n = grid.dim
        self.at_lo = self.idx == 0
        self.at_hi = self.idx == (grid.n - 1)[None, :]
        self._eigen_setup()
        self._probe(classes, thetas)
        self._boundary_setup()
        self._wide_setup()
        self._diag_bound()
        if params.verify_pairs:
            self.verify_monotone(params.verify_pairs, seed=params.seed, raise_on_fail=True)

    # -- construction helpers ------------------------------------------------

    def _eigen_setup(self):
        # eigenvalue operators: extreme eigenvalues as min/max of directional
        # second differences over nearest-neighbour directions (monotone)
        prm = self.op.params
        n = self.grid.dim
        self.eigen = None
        if prm.get("eigen_g") is None or prm.get("eigen_fn") is not self.op.fn:
            return
        which = tuple(prm["eigen_which"])
        if not all(i in (1, n) for i in which):
            return
        dirs = []
        for k in itertools.product((-1, 0, 1), repeat=n):
            k = np.array(k)
            nz = np.nonzero(k)[0]
            if nz.size and k[nz[0]] > 0:
                dirs.append(k)
        self.eigen = (prm["eigen_g"], which, dirs)

    def _eigen_F(self, v, p, sel, t):
        g, which, dirs = self.eigen
        h = self.grid.h
        u0 = v.reshape(-1)[sel]
        dvv = []
        for k in dirs:
            a = _shifted(v, k).reshape(-1)[sel]
            b = _shifted(v, -k).reshape(-1)[sel]
            L2 = float(np.sum((k * h) ** 2))
            dvv.append(((a + b) - 2.0 * u0) / L2)
        D = np.stack(dvv, axis=1)
        allnan = np.all(np.isnan(D), axis=1)
        D = np.where(allnan[:, None], 0.0, D)
        lo = np.nanmin(D, axis=1)
        hi = np.nanmax(D, axis=1)
        n = self.grid.dim
        neg = np.stack([-(lo if i == 1 else hi) for i in which], axis=1)
        return np.asarray(g(self.pts[sel], u0, p, neg), float)

    def _probe_states(self, rng, m):
        n = self.grid.dim
        P = self.params
        r = rng.uniform(-P.probe_r, P.probe_r, m)
        p = rng.uniform(-P.probe_p, P.probe_p, (m, n))
        X = np.clip(random_symmetric(rng, m, n, P.probe_X), -P.probe_X, P.probe_X)
        return r, p, X

    def _probe(self, classes, thetas):
        grid, op, P = self.grid, self.op, self.params
        n, M = grid.dim, grid.size
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=n))) * P.probe_p
        axes = np.concatenate([np.eye(n), -np.eye(n)]) * P.probe_p
        corners = np.concatenate([corners, axes])
        K = P.probe_count + corners.shape[0] + 2
        rng = np.random.default_rng(P.seed + 7919)
        x = np.repeat(self.pts, K, axis=0)
        r, p, X = self._probe_states(rng, M * K)
        # always include p = 0, X = 0, the corners of the p-box and X = +-probe_X I
        p[::K] = 0.0
        X[::K] = 0.0
        p = p.reshape(M, K, n)
        p[:, P.probe_count : P.probe_count + corners.shape[0], :] = corners[None]
        p = p.reshape(M * K, n)
        X = X.reshape(M, K, n, n)
        X[:, -2] = P.probe_X * np.eye(n)
        X[:, -1] = -P.probe_X * np.eye(n)
        X = X.reshape(M * K, n, n)
        base = op.evaluate(x, r, p, X)
        if not np.all(np.isfinite(base)):
            raise SchemeError("operator is not finite on the probe states")
        self.F_scale = 1.0 + float(np.max(np.abs(base)))
        tiny = 1e-9 * self.F_scale
        dp_ = 1e-6 * (1.0 + P.probe_p)
        dx_ = 1e-6 * (1.0 + P.probe_X)
        dr_ = 1e-6 * (1.0 + P.probe_r)
        fr = (op.evaluate(x, r + dr_, p, X) - op.evaluate(x, r - dr_, p, X)) / (2 * dr_)
        self.Fr_max = np.maximum(np.max(fr.reshape(M, K), axis=1), 0.0)
        dF = np.empty((M, K, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = dp_
            dF[:, :, a] = ((op.evaluate(x, r, p + e, X) - op.evaluate(x, r, p - e, X)) / (2 * dp_)).reshape(M, K)
        self.Fp_absmax = np.max(np.abs(dF), axis=1)
        if classes is None:
            cls = np.full((M, n), LF, dtype=np.int8)
            lo = np.all(dF >= -tiny / dp_ * 1e-3 - 1e-10, axis=1)
            hi = np.all(dF <= tiny / dp_ * 1e-3 + 1e-10, axis=1)
            cls[lo & ~hi] = BACK
            cls[hi & ~lo] = FWD
            cls[lo & hi] = NONE
            theta = np.where(cls == LF, P.theta_safety * self.Fp_absmax, 0.0)
        else:
            cls = np.asarray(classes, dtype=np.int8).reshape(M, n)
            theta = np.asarray(thetas, dtype=float).reshape(M, n)
        self.cls = cls
        self.theta = theta
        # second-order coefficients a_ab = -dF/dX_ab (per symmetric pair)
        self.a_diag = np.zeros((M, n))
        self.a_cross = np.zeros((M, n, n))
        if not op.first_order_only:
            for a in range(n):
                for b in range(a, n):
                    E = np.zeros((n, n))
                    E[a, b] = E[b, a] = dx_
                    d = (op.evaluate(x, r, p, X + E) - op.evaluate(x, r, p, X - E)) / (2 * dx_)
                    d = -d.reshape(M, K) / (1.0 if a == b else 2.0)
                    if a == b:
                        self.a_diag[:, a] = np.maximum(np.max(d, axis=1), 0.0)
                        if np.min(d) < -1e-6 * self.F_scale:
                            raise SchemeError("operator is not degenerate elliptic on the probe states")
                    else:
                        self.a_cross[:, a, b] = self.a_cross[:, b, a] = np.max(np.abs(d), axis=1)
        self.second_order = bool(np.any(self.a_diag > 1e-12) or np.any(self.a_cross > 1e-12))

    def _boundary_setup(self):
        grid, M, n = self.grid, self.grid.size, self.grid.dim
        owner = self.owner
        self.kind = np.zeros(M, dtype=np.int8)  # 0 interior, 1 Dirichlet-strong, 2 Dirichlet-visc, 3 oblique-strong, 4 oblique-visc, 5 state constraint
        self.avail = np.ones(M, dtype=bool)
        self.bdata = np.zeros(M)
        self.nu = np.zeros((M, n))
        self.normal_axis = np.full(M, -1)
        if self.bc is None:
            self.kind[owner >= 0] = 1
            self.bdata[owner >= 0] = np.nan  # boundary values held fixed
            self.hold_boundary = True
            return
        self.hold_boundary = False
        tiny = 1e-10
        for face in np.unique(owner[owner >= 0]):
            a, s = divmod(int(face), 2)
            cond = self.bc.condition(a, s)
            sel = np.nonzero(owner == face)[0]
            self.normal_axis[sel] = a
            pts = self.pts[sel]
            if isinstance(cond, Dirichlet):
                self.kind[sel] = 1 if cond.sense == "strong" else 2
                self.bdata[sel] = cond.data(pts)
            elif isinstance(cond, Oblique):
                self.kind[sel] = 3 if cond.sense == "strong" else 4
                self.bdata[sel] = cond.data(pts)
                self.nu[sel] = cond.direction(pts, exterior_normal(n, a, s))
            elif isinstance(cond, StateConstraint):
                self.kind[sel] = 5
                for b in range(n):
                    ext = self.at_lo[sel, b] | self.at_hi[sel, b]
                    if np.any(ext & ((self.a_diag[sel, b] > tiny) | np.any(self.a_cross[sel, b, :] > tiny, axis=-1))):
                        raise SchemeError("state constraints need first-order behaviour in the normal direction")
        # availability of the interior formula at boundary nodes
        bnd = owner >= 0
        for b in range(n):
            lo = self.at_lo[:, b]
            hi = self.at_hi[:, b]
            ext = lo | hi
            need_out = (lo & np.isin(self.cls[:, b], (BACK, LF))) | (hi & np.isin(self.cls[:, b], (FWD, LF)))
            second = (self.a_diag[:, b] > tiny) | np.any(self.a_cross[:, b, :] > tiny, axis=1)
            self.avail &= ~(bnd & ext & (need_out | second))

    def _wide_setup(self):
        op, P, grid = self.op, self.params, self.grid
        self.use_wide = False
        self.median = None
        self.reach = 1
        if grid.dim == 2 and op.params.get("level_set_mcf") is op.fn and P.wide_stencil is not False:
            # 2-D level-set curvature: -(2/rho^2)(median of u on a circle - u)
            hmax = float(np.max(grid.h))
            rho = P.wide_radius if P.wide_radius is not None else 2.0 * hmax
            ang = 2.0 * np.pi * np.arange(P.median_angles) / P.median_angles
            self.rho = float(rho)
            self.median = self.rho * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            self.reach = int(np.ceil(self.rho / float(np.min(grid.h)))) + 1
            return
        if op.quasilinear is None or grid.dim < 2 or not self.second_order or P.wide_stencil is False:
            return
        hmax = float(np.max(grid.h))
        rho = P.wide_radius if P.wide_radius is not None else max(2.0 * hmax, np.sqrt(hmax))
        self.rho = float(rho)
        self.use_wide = True
        self.force_wide = bool(P.wide_stencil)
        self.reach = int(np.ceil(self.rho / float(np.min(grid.h)))) + 1

    def _diag_bound(self):
        grid, P = self.grid, self.params
        h = grid.h[None, :]
        first = np.where(self.cls == LF, self.theta, np.where(self.cls == NONE, 0.0, self.Fp_absmax)) / h
        second = 2.0 * self.a_diag / (h * h)
        if self.use_wide or self.eigen is not None:
            hmin = float(np.min(grid.h))
            second = np.maximum(second, 2.0 * self.a_diag / (hmin * hmin))
            # directional stencils spread the trace over rho-steps no shorter than h_min
            tr = np.sum(self.a_diag, axis=1, keepdims=True)
            second = np.maximum(second, 2.0 * tr / (hmin * hmin) / grid.dim)
        d = self.Fr_max + np.sum(first, axis=1) + np.sum(second, axis=1)
        if self.median is not None:
            d = self.Fr_max + 2.0 / self.rho**2
        kind = self.kind
        nb = np.zeros(grid.size)
        for a in range(grid.dim):
            nb = nb + np.abs(self.nu[:, a]) / grid.h[a]
        d = np.where(kind == 1, 1.0, d)
        d = np.where((kind == 3), nb, d)
        d = np.where(kind == 2, np.where(self.avail, np.maximum(d, 1.0), 1.0), d)
        d = np.where(kind == 4, np.where(self.avail, np.maximum(d, nb), nb), d)
        d = np.maximum(d, 1e-300)
        self.diag = d
        if P.tau is not None:
            tau = np.full(grid.size, float(P.tau))
            bad = tau * d > 1.0 + 1e-12
            if np.any(bad):
                k = int(np.argmax(tau * d))
                raise SchemeError(
                    f"tau={P.tau} exceeds the monotonicity bound {1.0 / d[k]:.3g} at node {self.idx[k].tolist()}"
                )
        else:
            tau = P.tau_safety / d
        self.tau = tau
        self.tau_bound = 1.0 / d

    # -- residual -------------------------------------------------------------

    def _grad_arrays(self, v):
        dm, dp = one_sided(v, self.grid.h)
        M, n = self.grid.size, self.grid.dim
        Dm = np.stack([d.reshape(M) for d in dm], axis=1)
        Dp = np.stack([d.reshape(M) for d in dp], axis=1)
        return Dm, Dp

    def _hessian(self, v, p, sel):
        """Sign-adapted compact discrete Hessian at the selected flat nodes."""
        grid = self.grid
        n = grid.dim
        m = sel.shape[0]
        X = np.zeros((m, n, n))
        if not self.second_order:
            return X
        d2 = second_diffs(v, grid.h)
        for a in range(n):
            X[:, a, a] = np.nan_to_num(d2[a].reshape(-1)[sel], nan=0.0)
        if n > 1:
            A = None
            if self.op.quasilinear is not None:
                A = self.op.quasilinear.A(self.pts[sel], p)
            for a in range(n):
                for b in range(a + 1, n):
                    if not np.any(self.a_cross[sel, a, b] > 0):
                        continue
                    pos, neg = cross_diffs(v, grid.h, a, b)
                    pos = np.nan_to_num(pos.reshape(-1)[sel], nan=0.0)
                    neg = np.nan_to_num(neg.reshape(-1)[sel], nan=0.0)
                    if A is not None:
                        sgn = A[:, a, b] >= 0
                    else:
                        sgn = self._probe_cross_sign(v, p, X, sel, a, b)
                    c = np.where(sgn, pos, neg)
                    X[:, a, b] = c
                    X[:, b, a] = c
        return X

    def _probe_cross_sign(self, v, p, X, sel, a, b):
        n = self.grid.dim
        E = np.zeros((n, n))
        E[a, b] = E[b, a] = 1e-6
        r = v.reshape(-1)[sel]
        up = self.op.evaluate(self.pts[sel], r, p, X + E)
        dn = self.op.evaluate(self.pts[sel], r, p, X - E)
        return up <= dn

    def _wide_second_order(self, v, p, sel):
        """-sum_k mu_k D_vk u along eigenvectors of A(x,p), and a DD mask."""
        grid = self.grid
        n = grid.dim
        x = self.pts[sel]
        A = self.op.quasilinear.A(x, p)
        h = grid.h
        # diagonal dominance test for the compact stencil
        dd = np.ones(sel.shape[0], dtype=bool)
        for a in range(n):
            off = np.zeros(sel.shape[0])
            for b in range(n):
                if b != a:
                    off = off + np.abs(A[:, a, b]) / (h[a] * h[b])
            dd &= A[:, a, a] / (h[a] * h[a]) >= off * (1 + 1e-12)
        if self.force_wide:
            dd[:] = False
        mu, V = np.linalg.eigh(A)
        mu = np.maximum(mu, 0.0)
        u0 = v.reshape(-1)[sel]
        total = np.zeros(sel.shape[0])
        lo, hi = grid.lo, grid.hi
        for k in range(n):
            vk = V[:, :, k]
            with np.errstate(divide="ignore"):
                lim = np.where(
                    np.abs(vk) > 1e-14,
                    np.minimum(x - lo, hi - x) / np.abs(vk),
                    np.inf,
                )
            rho = np.minimum(self.rho, np.min(lim, axis=1))
            rho = np.maximum(rho, 1e-300)
            pts_p = x + rho[:, None] * vk
            pts_m = x - rho[:, None] * vk
            ip = self._interp(v, pts_p)
            im = self._interp(v, pts_m)
            d2 = ((ip + im) - 2.0 * u0) / (rho * rho)
            total = total + np.where(mu[:, k] > 0, mu[:, k] * d2, 0.0)
        return -total, dd

    def _interp(self, v, pts):
        grid = self.grid
        coords = ((pts - grid.lo) / grid.h).T
        coords = np.clip(coords, 0, (grid.n - 1)[:, None])
        return ndimage.map_coordinates(v, coords, order=1, mode="nearest", prefilter=False)

    def _F_h(self, v, Dm, Dp, sel, t, p_override=None, rows=None):
        """Discrete operator at the selected flat nodes.

        rows = (dm, dp) supplies the one-sided differences of the selected
        nodes directly (sel may then repeat nodes).
        """
        cls = self.cls[sel]
        dm, dp = (Dm[sel], Dp[sel]) if rows is None else rows
        p = choose_gradient(cls, dm, dp)
        if p_override is not None:
            ax, vals = p_override
            p = p.copy()
            p[:, ax] = vals
        r = v.reshape(-1)[sel]
        x = self.pts[sel]
        if self.median is not None:
            x = self.pts[sel]
            vals = np.stack([self._interp(v, x + d[None]) for d in self.median], axis=1)
            return -(2.0 / self.rho**2) * (np.median(vals, axis=1) - r)
        elif self.eigen is not None:
            F = self._eigen_F(v, p, sel, t)
        else:
            X = self._hessian(v, p, sel)
            F = self.op.evaluate(x, r, p, X, t=t)
        if self.use_wide:
            wide, dd = self._wide_second_order(v, p, sel)
            if not np.all(dd):
                H = self.op.quasilinear.H(x, r, p)
                F = np.where(dd, F, wide + H)
        dmc = np.where(np.isnan(dm), 0.0, dm)
        dpc = np.where(np.isnan(dp), 0.0, dp)
        lf = lf_term(cls, self.theta[sel], dmc, dpc)
        return F - lf

    def _oblique_B(self, Dm, Dp, sel):
        n = self.grid.dim
        B = np.zeros(sel.shape[0])
        ax_n = self.normal_axis[sel]
        for a in range(n):
            nu = self.nu[sel, a]
            dm, dp = Dm[sel, a], Dp[sel, a]
            lo, hi = self.at_lo[sel, a], self.at_hi[sel, a]
            normal = ax_n == a
            inward = np.where(lo, dp, dm)
            tang = np.where(nu > 0, np.where(np.isnan(dm), dp, dm), np.where(np.isnan(dp), dm, dp))
            d = np.where(normal, inward, tang)
            B = B + np.where(nu != 0, nu * d, 0.0)
        return B - self.bdata[sel]

    def residual(self, u, t=0.0):
        """R(u) as an array of the grid shape."""
        v = np.asarray(u.values if isinstance(u, GridFn) else u, dtype=float).reshape(self.grid.shape)
        Dm, Dp = self._grad_arrays(v)
        M = self.grid.size
        R = np.empty(M)
        kind = self.kind
        flat = v.reshape(-1)
        interior = np.nonzero(kind == 0)[0]
        if interior.size:
            R[interior] = self._F_h(v, Dm, Dp, interior, t)
        if self.hold_boundary:
            b = np.nonzero(kind == 1)[0]
            R[b] = 0.0
            return R.reshape(self.grid.shape)
        sel = np.nonzero(kind == 1)[0]
        if sel.size:
            R[sel] = flat[sel] - self.bdata[sel]
        sel = np.nonzero(kind == 3)[0]
        if sel.size:
            R[sel] = self._oblique_B(Dm, Dp, sel)
        for k in (2, 4):
            sel = np.nonzero(kind == k)[0]
            if not sel.size:
                continue
            B = flat[sel] - self.bdata[sel] if k == 2 else self._oblique_B(Dm, Dp, sel)
            av = self.avail[sel]
            out = B.copy()
            if np.any(av):
                s2 = sel[av]
                Fh = self._F_h(v, Dm, Dp, s2, t)
                comb = np.maximum(Fh, B[av]) if self.params.viscosity_branch == "max" else np.minimum(Fh, B[av])
                out[av] = comb
            R[sel] = out
        sel = np.nonzero(kind == 5)[0]
        if sel.size:
            R[sel] = self._state_constraint(v, Dm, Dp, sel, t)
        return R.reshape(self.grid.shape)

    def _sc_lattice(self, k):
        """Fixed p-lattice for nodes on k boundary axes: fine on [-P, P], coarse tail to the extent."""
        P = self.params.probe_p
        cells = max(2, self.params.state_constraint_cells // 4 ** (k - 1))
        cells += cells % 2  # keep p = 0 on the lattice
        fine = np.linspace(-P, P, cells + 1)
        ext = self.params.state_constraint_extent
        tail = [1.5, 2.0, 3.0, 4.0, 6.0, 8.0] if k == 1 else [2.0, ext]
        tail = np.array([m for m in tail if 1.0 < m <= ext]) * P
        return np.concatenate([-tail[::-1], fine, tail])

    @staticmethod
    def _inf_right(vals, lat, d):
        """inf over p >= d of the piecewise-linear interpolant of vals on lat.

        Nondecreasing in d also in floating point: inside a cell the value is
        either the rising segment or the right endpoint, and the suffix
        minimum covers the rest of the half-line.
        """
        L = lat.shape[0]
        d = np.clip(d, lat[0], lat[-1])
        j = np.clip(np.searchsorted(lat, d, side="right") - 1, 0, L - 2)
        cols = np.arange(vals.shape[1])
        suf = np.minimum.accumulate(vals[::-1], axis=0)[::-1]
        a, b = vals[j, cols], vals[j + 1, cols]
        w = (d - lat[j]) / (lat[j + 1] - lat[j])
        cell = np.where(b > a, a + w * (b - a), b)
        return np.minimum(cell, suf[j + 1, cols])

    def _state_constraint(self, v, Dm, Dp, sel, t):
        """Godunov-type residual: F minimized over the one-sided jets a boundary node admits.

        On a high face p_a ranges over [D-, inf), on a low face over
        (-inf, D+].  F is replaced by its interpolant on a fixed p-lattice
        so the infimum is computed exactly and stays monotone.
        """
        out = np.empty(sel.shape[0])
        on = self.at_lo[sel] | self.at_hi[sel]
        patterns = np.unique(on, axis=0)
        for pat in patterns:
            rows = np.nonzero(np.all(on == pat, axis=1))[0]
            nodes = sel[rows]
            axes = [a for a in range(self.grid.dim) if pat[a]]
            lat = self._sc_lattice(len(axes))

            m, k, L = nodes.shape[0], len(axes), lat.shape[0]
            # every lattice combination on the boundary axes in one batched call
            grids = np.meshgrid(*([lat] * k), indexing="ij")
            combo = np.stack([g.reshape(-1) for g in grids], axis=1)
            nc = combo.shape[0]
            dm = np.tile(Dm[nodes], (nc, 1))
            dp = np.tile(Dp[nodes], (nc, 1))
            for i, a in enumerate(axes):
                dm[:, a] = np.repeat(combo[:, i], m)
                dp[:, a] = np.repeat(combo[:, i], m)
            vals = self._F_h(v, None, None, np.tile(nodes, nc), t, rows=(dm, dp)).reshape((L,) * k + (m,))
            # reduce the innermost boundary axis first
            for i in range(k - 1, -1, -1):
                a = axes[i]
                hi = self.at_hi[nodes, a]
                lead = vals.shape[:i]
                V = np.moveaxis(vals, i, 0).reshape(L, -1)
                d_hi = np.tile(Dm[nodes, a], int(np.prod(lead)))
                d_lo = np.tile(-Dp[nodes, a], int(np.prod(lead)))
                hi_t = np.tile(hi, int(np.prod(lead)))
                right = self._inf_right(V, lat, np.where(hi_t, d_hi, 0.0))
                left = self._inf_right(V[::-1], -lat[::-1], np.where(hi_t, 0.0, d_lo))
                vals = np.where(hi_t, right, left).reshape(lead + (m,))
            out[rows] = vals
        return out

    # -- maps -------------------------------------------------------------------

    def euler(self, u, t=0.0, tau=None):
        v = np.asarray(u.values if isinstance(u, GridFn) else u, dtype=float).reshape(self.grid.shape)
        tau = self.tau.reshape(self.grid.shape) if tau is None else tau
        return v - tau * self.residual(v, t)

    def colors(self):
        """Node coloring such that nodes of one color have disjoint stencils."""
        w = 2 * self.reach + 1
        c = np.zeros(self.grid.size, dtype=int)
        for a in range(self.grid.dim):
            c = c * w + (self.idx[:, a] % w)
        return c

    def jacobian(self, u, t=0.0, R0=None):
        """Sparse finite-difference Jacobian of R by stencil coloring."""
        grid = self.grid
        v = np.asarray(u.values if isinstance(u, GridFn) else u, dtype=float).reshape(grid.shape)
        flat = v.reshape(-1)
        R0 = self.residual(v, t).reshape(-1) if R0 is None else R0.reshape(-1)
        w = 2 * self.reach + 1
        col = self.colors()
        rows, cols, vals = [], [], []
        delta = 1e-7 * (1.0 + np.abs(flat))
        for c in np.unique(col):
            mask = col == c
            pert = flat.copy()
            pert[mask] += delta[mask]
            dR = self.residual(pert.reshape(grid.shape), t).reshape(-1) - R0
            nz = np.nonzero(dR)[0]
            if not nz.size:
                continue
            # owner of each affected row: the unique node of color c within reach
            cidx = np.zeros((nz.size, grid.dim), dtype=int)
            code = c
            digits = []
            for a in reversed(range(grid.dim)):
                digits.append(code % w)
                code //= w
            digits = digits[::-1]
            ii = self.idx[nz]
            ok = np.ones(nz.size, dtype=bool)
            for a in range(grid.dim):
                base = ii[:, a] - ((ii[:, a] - digits[a]) % w)
                cand = np.where(ii[:, a] - base <= self.reach, base, base + w)
                ok &= (cand >= 0) & (cand < grid.n[a]) & (np.abs(cand - ii[:, a]) <= self.reach)
                cidx[:, a] = cand
            j = np.ravel_multi_index(tuple(np.clip(cidx, 0, grid.n - 1).T), grid.shape)
            ok &= mask[j]
            rows.append(nz[ok])
            cols.append(j[ok])
            vals.append(dR[nz[ok]] / delta[j[ok]])
        if rows:
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            vals = np.concatenate(vals)
        else:
            rows = cols = np.zeros(0, int)
            vals = np.zeros(0)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(grid.size, grid.size))

    # -- monotonicity ------------------------------------------------------------

    def ordered_pairs(self, count, seed=0, kind="smooth", amplitude=None):
        """Seeded ordered pairs u <= v inside the probe region of the scheme."""
        rng = np.random.default_rng(seed)
        grid, P = self.grid, self.params
        hmin = float(np.min(grid.h))
        amp = 1e-3 * hmin * hmin if amplitude is None else amplitude
        for _ in range(count):
            if kind == "smooth":
                u = _smooth_state(rng, grid, 0.5 * P.probe_p, 0.5 * P.probe_X)
            else:
                u = rng.uniform(-P.probe_r, P.probe_r, grid.shape)
            w = np.maximum(rng.normal(size=grid.shape), 0.0) * amp * rng.uniform(0.1, 1.0)
            yield u, u + w

    def verify_monotone(self, count, seed=0, kind="smooth", raise_on_fail=False, amplitude=None):
        """Check T(u) <= T(v) exactly on seeded ordered pairs; returns the failure count."""
        fails = 0
        first = None
        for u, v in self.ordered_pairs(count, seed, kind, amplitude):
            Tu = self.euler(u)
            Tv = self.euler(v)
            bad = Tu > Tv
            if np.any(bad):
                fails += 1
                if first is None:
                    first = (u, v, bad)
        if fails and raise_on_fail:
            u, v, bad = first
            k = int(np.argmax(bad.reshape(-1)))
            node = self.idx[k].tolist()
            J = self.jacobian(u)
            row = J.getrow(k).toarray().ravel()
            row[k] = -np.inf
            j = int(np.argmax(row))
            off = (self.idx[j] - self.idx[k]).tolist()
            raise MonotonicityError(
                f"Euler map is not monotone at node {node} (neighbor offset {off}, dR/du = {row[j]:.3g})",
                node=node,
                offset=off,
            )
        return fails


def discretize(op: OperatorSpec, grid: Grid, bc: Optional[BoundarySpec] = None, params: Optional[SchemeParams] = None, **kw) -> SchemeMap:
    """Build the monotone scheme for F = 0 on the grid with the given boundary conditions.

    bc=None holds boundary node values fixed (the residual there is 0).
    """
    params = params or SchemeParams()
    return SchemeMap(op, grid, bc, params, **kw)
