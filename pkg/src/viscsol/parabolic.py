"""Explicit monotone time stepping for u_t + F(t, x, u, Du, D^2u) = 0 and mean curvature flow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import kernels
from .boundary import BoundarySpec, Dirichlet, Oblique
from .core import Grid, GridFn, OperatorSpec
from .scheme import FWD, SchemeMap, SchemeParams, discretize


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Time interval [t0, T] with a fixed step or a CFL-adaptive one (dt = sigma * bound)."""

    T: float
    dt: Optional[float] = None
    sigma: float = 0.5
    t0: float = 0.0

    def __post_init__(self):
        if not self.T > self.t0:
            raise ValueError("need T > t0")
        if not 0 < self.sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass
class FlowState:
    t: float
    u: GridFn
    level_set: Optional[np.ndarray] = None
    radius: Optional[float] = None


def _scheme_for(op, grid, bc, params):
    params = params or SchemeParams()
    if op.time_dependent:
        probe = op.at_time(0.0)
        sch = discretize(probe, grid, bc, params)
        sch.op = op
        return sch
    return discretize(op, grid, bc, params)


def _check_bc(bc, dim):
    if bc is None:
        return
    for a in range(dim):
        for s in (0, 1):
            cond = bc.condition(a, s)
            if isinstance(cond, Dirichlet) and cond.sense == "strong":
                continue
            if isinstance(cond, Oblique) and cond.sense == "strong":
                continue
            raise NotImplementedError("time stepping supports strong Dirichlet and strong oblique conditions")


def cfl_bound(scheme: SchemeMap):
    """Largest dt for which u - dt F_h(u) is monotone at every updated node."""
    interior = scheme.kind == 0
    if scheme.bc is None:
        interior = scheme.owner < 0
    if not np.any(interior):
        return math.inf
    return float(np.min(scheme.tau_bound[interior]))


def _boundary_update(scheme: SchemeMap, u_new, t):
    """Boundary values after the interior update: data for Dirichlet, solved B_h = 0 for oblique."""
    if scheme.bc is None or scheme.hold_boundary:
        return u_new
    flat = u_new.reshape(-1)
    kind = scheme.kind
    d = np.nonzero(kind == 1)[0]
    flat[d] = scheme.bdata[d]
    o = np.nonzero(kind == 3)[0]
    if o.size:
        # B_h is affine in the node's own value: solve it from two evaluations
        base = flat.copy()
        base[o] = 0.0
        r0 = scheme.residual(base, t).reshape(-1)[o]
        base[o] = 1.0
        r1 = scheme.residual(base, t).reshape(-1)[o]
        flat[o] = -r0 / (r1 - r0)
    return u_new


def step(op: OperatorSpec, state: FlowState, bc: Optional[BoundarySpec], dt: float, scheme: Optional[SchemeMap] = None, params=None) -> FlowState:
    """u_next = u - dt F_h(t, x, u, D_h u, D_h^2 u) at interior nodes; boundary per bc.

    bc=None holds the boundary values.  Raises CFLError when dt exceeds the
    monotonicity bound of the explicit map.
    """
    grid = state.u.grid
    _check_bc(bc, grid.dim)
    sch = scheme if scheme is not None else _scheme_for(op, grid, bc, params)
    bound = cfl_bound(sch)
    if dt > bound * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.6g} exceeds the monotone step bound {bound:.6g}")
    u = np.asarray(state.u.values, float)
    R = sch.residual(u, state.t)
    if not np.all(np.isfinite(R)):
        raise FloatingPointError("non-finite spatial residual")
    upd = (sch.kind == 0).reshape(grid.shape) if bc is not None else (sch.owner < 0).reshape(grid.shape)
    new = np.where(upd, u - dt * R, u)
    new = _boundary_update(sch, new, state.t + dt)
    return FlowState(state.t + dt, GridFn(grid, new))


def _segments(t0, times, dt_max, dt_fixed):
    """Step sizes reaching each snapshot time exactly."""
    out = []
    t = t0
    for s in times:
        span = s - t
        if span < 0:
            raise ValueError("snapshot times must be increasing")
        if span == 0:
            out.append([])
            continue
        if dt_fixed is not None:
            k = max(1, int(math.ceil(span / dt_fixed - 1e-12)))
            steps = [dt_fixed] * (k - 1)
            steps.append(span - dt_fixed * (k - 1))
        else:
            k = max(1, int(math.ceil(span / dt_max)))
            steps = [span / k] * k
        out.append(steps)
        t = s
    return out


def evolve(
    op: OperatorSpec,
    psi: GridFn,
    bc: Optional[BoundarySpec],
    tg: TimeGrid,
    snapshots: Optional[Sequence[float]] = None,
    params=None,
) -> List[FlowState]:
    """Repeated explicit steps; returns the states at the snapshot times (default: t0 and T)."""
    if not np.all(np.isfinite(psi.values)):
        raise ValueError("initial data must be finite")
    grid = psi.grid
    _check_bc(bc, grid.dim)
    sch = _scheme_for(op, grid, bc, params)
    bound = cfl_bound(sch)
    if tg.dt is not None and tg.dt > bound * (1 + 1e-12):
        raise CFLError(f"dt = {tg.dt:.6g} exceeds the monotone step bound {bound:.6g}")
    times = sorted(set([tg.t0, tg.T] if snapshots is None else list(snapshots)))
    state = FlowState(tg.t0, GridFn(grid, np.array(psi.values, float)))
    if bc is not None:
        state = FlowState(tg.t0, GridFn(grid, _boundary_update(sch, np.array(psi.values, float), tg.t0)))
    out = []
    for steps, ts in zip(_segments(tg.t0, times, tg.sigma * bound, tg.dt), times):
        for dt in steps:
            state = step(op, state, bc, dt, scheme=sch)
        state = FlowState(ts, state.u)
        out.append(state)
    return out


def with_time_source(op: OperatorSpec, g: Callable[[float], float]) -> OperatorSpec:
    """F + g(t) as a time-dependent operator."""
    base = op

    def fn(x, r, p, X, t):
        return base.evaluate(x, r, p, X, t) + g(t)

    return op.replace(fn=fn, time_dependent=True, name=f"{op.name} + g(t)")


def data_dependence_gap(op, g, psi, bc, tg, params=None):
    """max over nodes and snapshots of u - v - int_0^t g, with v driven by F + g (should be <= 0)."""
    if tg.dt is None:
        sch = _scheme_for(op, psi.grid, bc, params)
        dt = tg.sigma * cfl_bound(sch)
        tg = replace(tg, dt=dt)
    k = int(math.ceil((tg.T - tg.t0) / tg.dt - 1e-12))
    times = [tg.t0 + tg.dt * i for i in range(1, k)] + [tg.T]
    us = evolve(op, psi, bc, tg, times, params)
    vs = evolve(with_time_source(op, g), psi, bc, tg, times, params)
    worst = -math.inf
    integral = 0.0
    t_prev = tg.t0
    for su, sv in zip(us, vs):
        integral += g(t_prev) * (su.t - t_prev)
        t_prev = su.t
        worst = max(worst, float(np.max(su.u.values - sv.u.values)) - integral)
    return worst


def spacetime_step(op: OperatorSpec, state: FlowState, bc: Optional[BoundarySpec], dt: float, scheme: SchemeMap) -> FlowState:
    """The explicit update recomputed by treating t as an extra space coordinate.

    The space-time operator is a + F(x, r, p, X) on the two-slice grid
    {t, t+dt} x grid, with a forward difference in time and the spatial
    stencil classes of ``scheme``.  For t-independent F this reproduces
    step() exactly.
    """
    grid = state.u.grid
    n = grid.dim
    if op.time_dependent:
        raise ValueError("translation consistency is asserted for t-independent operators")
    if scheme.use_wide:
        raise ValueError("space-time comparison needs the compact stencil")
    inner = op

    def fn(x, r, p, X):
        return p[:, 0] + inner.fn(x[:, 1:], r, p[:, 1:], X[:, 1:, 1:])

    st_op = OperatorSpec(
        n + 1,
        fn,
        name=f"a + {op.name}",
        first_order_only=op.first_order_only,
        domain=(np.r_[state.t, grid.lo], np.r_[state.t + dt, grid.hi]),
    )
    st_grid = Grid(np.r_[state.t, grid.lo], np.r_[state.t + dt, grid.hi], np.r_[2, grid.n])
    cls = np.concatenate([np.full((grid.size, 1), FWD, dtype=np.int8), scheme.cls], axis=1)
    th = np.concatenate([np.zeros((grid.size, 1)), scheme.theta], axis=1)
    cls = np.concatenate([cls, cls])
    th = np.concatenate([th, th])
    st = SchemeMap(st_op, st_grid, None, replace(scheme.params, verify_pairs=0), classes=cls, thetas=th)
    # the spatial Hessian stencil selection follows the original scheme
    st.a_cross[:, 1:, 1:] = np.concatenate([scheme.a_cross, scheme.a_cross])
    st.a_cross[:, 0, :] = 0.0
    st.a_cross[:, :, 0] = 0.0
    st.second_order = scheme.second_order
    u = np.asarray(state.u.values, float)
    U = np.stack([u, u])
    Dm, Dp = st._grad_arrays(U)
    upd = (scheme.kind == 0) if bc is not None else (scheme.owner < 0)
    sel = np.nonzero(upd)[0]
    Rhat = st._F_h(U, Dm, Dp, sel, state.t)
    flat = u.reshape(-1).copy()
    flat[sel] = flat[sel] - dt * Rhat
    new = _boundary_update(scheme, flat.reshape(grid.shape), state.t + dt)
    return FlowState(state.t + dt, GridFn(grid, new))


# ---------------------------------------------------------------------------
# mean curvature flow
# ---------------------------------------------------------------------------


def extract_level_set(u: GridFn, c: float = 0.0) -> np.ndarray:
    """Points of {u = c} by linear interpolation along grid edges with a sign change."""
    grid = u.grid
    v = np.asarray(u.values, float) - c
    pts = grid.coords()
    out = [pts[v == 0.0]]
    for a in range(grid.dim):
        n = v.shape[a]
        lo = np.take(v, range(0, n - 1), axis=a)
        hi = np.take(v, range(1, n), axis=a)
        plo = np.take(pts, range(0, n - 1), axis=a)
        phi = np.take(pts, range(1, n), axis=a)
        cross = ((lo < 0) & (hi > 0)) | ((lo > 0) & (hi < 0))
        th = lo[cross] / (lo[cross] - hi[cross])
        out.append(plo[cross] + th[:, None] * (phi[cross] - plo[cross]))
    return np.concatenate(out, axis=0) if out else np.zeros((0, grid.dim))


def fit_radius(points: np.ndarray):
    """Algebraic least-squares sphere fit; returns (center, radius)."""
    P = np.asarray(points, float)
    if P.shape[0] < P.shape[1] + 1:
        raise ValueError("not enough points for a sphere fit")
    A = np.concatenate([2.0 * P, np.ones((P.shape[0], 1))], axis=1)
    b = np.sum(P * P, axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    center = sol[:-1]
    r2 = sol[-1] + center @ center
    return center, float(math.sqrt(max(r2, 0.0)))


@dataclass
class MCFResult:
    states: List[FlowState]
    dt: float
    steps: int
    extinction_time: Optional[float] = None


def mcf_dt(h, dim, sigma=0.5):
    return sigma * h * h / (2.0 * dim * 2.0)


def mcf_evolve(psi: GridFn, T: float, sigma: float = 0.5, snapshots: Optional[Sequence[float]] = None, dt: Optional[float] = None) -> MCFResult:
    """Level-set mean curvature flow u_t = |Du| div(Du/|Du|) with boundary values held.

    Central differences; the curvature term is set to 0 where
    |D_h u| <= eps_p = 1e-10 (1 + |u|_inf / h).
    """
    grid = psi.grid
    N = grid.dim
    if N not in (2, 3):
        raise ValueError("mean curvature flow is implemented for N = 2, 3")
    if not np.allclose(grid.h, grid.h[0], rtol=1e-12):
        raise ValueError("mean curvature flow needs equal spacing on all axes")
    h = float(grid.h[0])
    dt_max = mcf_dt(h, N, sigma)
    if dt is not None and dt > mcf_dt(h, N, 1.0) * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.6g} exceeds h^2/(4N) = {mcf_dt(h, N, 1.0):.6g}")
    kern = kernels.mcf_step_2d if N == 2 else kernels.mcf_step_3d
    times = sorted(set([0.0, T] if snapshots is None else list(snapshots)))
    u = np.array(psi.values, float)
    t = 0.0
    states = []
    nsteps = 0
    ext = None
    for steps, ts in zip(_segments(0.0, times, dt_max, dt), times):
        for d in steps:
            eps = 1e-10 * (1.0 + float(np.max(np.abs(u))) / h)
            u = kern(u, h, d, eps)
            nsteps += 1
            t += d
        t = ts
        st = FlowState(ts, GridFn(grid, u.copy()))
        pts = extract_level_set(st.u)
        st.level_set = pts
        if pts.shape[0] >= N + 1:
            st.radius = fit_radius(pts)[1]
        states.append(st)
        if not pts.shape[0] and ts > 0:
            ext = ts
            break
    return MCFResult(states, dt_max if dt is None else dt, nsteps, ext)


def symmetry_defect_2d(u: np.ndarray) -> float:
    """max deviation of a square 2-D array from its 8 grid symmetries."""
    v = np.asarray(u, float)
    cands = [v[::-1, :], v[:, ::-1], v[::-1, ::-1], v.T, v.T[::-1, :], v.T[:, ::-1], v.T[::-1, ::-1]]
    return max(float(np.max(np.abs(v - c))) for c in cands)
