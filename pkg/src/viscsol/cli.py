"""Command-line driver: JSON problem configs in, CSV/JSON results out.

Exit codes: 0 success, 1 config error, 2 non-convergence or CFL violation,
3 certification (or diagnostic check) failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import convexity_defects, doubling_chain_checks, doubling_maximize, inf_convolve, sup_convolve
from .analytic import CLOSED_FORMS, closed_form
from .boundary import BoundarySpec, Dirichlet, Oblique, StateConstraint
from .core import Grid, GridFn, OperatorSpec, check_proper
from .expr import Expr, ExprError
from .jets import certify
from .operators import LinearCoefficients, catalog_ids, catalog_operator, make_linear
from .parabolic import CFLError, TimeGrid, evolve, mcf_evolve
from .scheme import MonotonicityError, SchemeError, SchemeParams, discretize
from .solve import DivergenceError, solve_fixed_point

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_CERT = 0, 1, 2, 3
COMMANDS = ("solve", "certify", "flow", "doubling", "supconv", "convergence")
AXES = "xyz"


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# ---------------------------------------------------------------------------
# config access
# ---------------------------------------------------------------------------


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("", "top level must be an object")
    return cfg


def _get(d, key, path, kind=None, default=...):
    full = f"{path}.{key}" if path else key
    if key not in d:
        if default is ...:
            raise ConfigError(full, "missing required field")
        return default
    v = d[key]
    if kind is not None:
        kinds = kind if isinstance(kind, tuple) else (kind,)
        # bool is an int subclass; only accept it where asked for
        if not isinstance(v, kinds) or (isinstance(v, bool) and bool not in kinds):
            names = "/".join(k.__name__ for k in kinds)
            raise ConfigError(full, f"expected {names}, got {type(v).__name__}")
    return v


def _expr(src, dim, path, variables=()):
    try:
        return Expr(src, dim, variables)
    except ExprError as exc:
        raise ConfigError(path, str(exc)) from None


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def build_grid(cfg):
    d = _get(cfg, "domain", "", dict)
    lo = _get(d, "lo", "domain", (list, int, float))
    hi = _get(d, "hi", "domain", (list, int, float))
    n = _get(d, "n", "domain", (list, int))
    try:
        return Grid(lo, hi, n)
    except (ValueError, TypeError) as exc:
        raise ConfigError("domain", str(exc)) from None


def _data_field(src, dim, path):
    e = _expr(src, dim, path)
    return lambda pts: e(pts)


def _condition(c, dim, path):
    if not isinstance(c, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(c, "type", path, str)
    sense = _get(c, "sense", path, str, "strong")
    try:
        if kind == "dirichlet":
            return Dirichlet(_data_field(_get(c, "data", path, (str, int, float), 0.0), dim, f"{path}.data"), sense)
        if kind in ("neumann", "oblique"):
            f = _data_field(_get(c, "data", path, (str, int, float), 0.0), dim, f"{path}.data")
            nu = None
            if kind == "oblique":
                comps = _get(c, "nu", path, list)
                if len(comps) != dim:
                    raise ConfigError(f"{path}.nu", f"need {dim} components")
                es = [_expr(s, dim, f"{path}.nu[{k}]") for k, s in enumerate(comps)]
                nu = lambda pts, es=es: np.stack([e(pts) for e in es], axis=1)  # noqa: E731
            return Oblique(f, nu, sense, float(_get(c, "nu0", path, (int, float), 1e-8)))
        if kind == "state-constraint":
            return StateConstraint()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.type", f"unknown boundary type {kind!r}")


def build_boundary(cfg, dim):
    """None (boundary values held) when the config has no boundary section."""
    b = _get(cfg, "boundary", "", (dict, type(None)), None)
    if b is None:
        return None
    known = {f"{AXES[a]}_{s}" for a in range(dim) for s in ("lo", "hi")} | {"default"}
    for k in b:
        if k not in known:
            raise ConfigError(f"boundary.{k}", f"unknown face; use one of {sorted(known)}")
    faces = {}
    default = b.get("default")
    for a in range(dim):
        for s, tag in enumerate(("lo", "hi")):
            key = f"{AXES[a]}_{tag}"
            c = b.get(key, default)
            if c is None:
                raise ConfigError(f"boundary.{key}", "no condition and no default")
            faces[(a, s)] = _condition(c, dim, f"boundary.{key}")
    return BoundarySpec(faces)


def _expr_operator(d, dim, path):
    names = ["r"] + [f"p{AXES[a]}" for a in range(dim)]
    names += [f"X{AXES[a]}{AXES[b]}" for a in range(dim) for b in range(a, dim)]
    e = _expr(_get(d, "expr", path, str), dim, f"{path}.expr", names)

    def fn(x, r, p, X, t=0.0):
        vals = {"r": r}
        for a in range(dim):
            vals[f"p{AXES[a]}"] = p[:, a]
            for b in range(a, dim):
                vals[f"X{AXES[a]}{AXES[b]}"] = X[:, a, b]
        return e(x, t, **vals)

    gamma = _get(d, "gamma", path, (int, float, type(None)), None)
    first = bool(_get(d, "first_order", path, bool, False))
    return OperatorSpec(dim, fn, name=e.src, gamma=gamma, first_order_only=first)


def _coef(v, dim, path, shape):
    """Number, expression, or nested lists of either as a constant array or a map x -> (m, *shape).

    A scalar given for a vector or matrix slot means s * ones or s * I.
    """
    arr = np.asarray(v, dtype=object)
    if arr.shape == () and shape:
        base = np.eye(dim) if len(shape) == 2 else np.ones(dim)
        s = _expr(arr.item(), dim, path) if isinstance(arr.item(), str) else _number(arr.item(), path)
        if isinstance(s, Expr):
            return lambda x: s(x).reshape((-1,) + (1,) * len(shape)) * base[None]
        return s * base
    if arr.shape != shape:
        raise ConfigError(path, f"expected a scalar or shape {shape}, got {arr.shape}")
    flat = [_expr(s, dim, path) if isinstance(s, str) else _number(s, path) for s in arr.reshape(-1)]
    if not any(isinstance(f, Expr) for f in flat):
        return np.asarray(flat, float).reshape(shape)

    def call(x):
        cols = [f(x) if isinstance(f, Expr) else np.full(x.shape[0], f) for f in flat]
        return np.stack(cols, axis=1).reshape((x.shape[0],) + shape)

    return call


def build_operator(cfg, grid):
    d = _get(cfg, "operator", "", dict)
    oid = _get(d, "id", "operator", str)
    dim = grid.dim
    if int(_get(d, "dim", "operator", int, dim)) != dim:
        raise ConfigError("operator.dim", f"operator dimension differs from the domain dimension {dim}")
    if oid == "zero":
        return OperatorSpec(dim, lambda x, r, p, X: np.zeros(x.shape[0]), name="zero", gamma=0.0)
    if oid == "expr":
        op = _expr_operator(d, dim, "operator")
    elif oid == "linear" and "coefficients" in d:
        c = _get(d, "coefficients", "operator", dict)
        pth = "operator.coefficients"
        coef = LinearCoefficients(
            dim,
            A=_coef(c["A"], dim, f"{pth}.A", (dim, dim)) if "A" in c else None,
            b=_coef(c.get("b", 0.0), dim, f"{pth}.b", (dim,)),
            c=_coef(c.get("c", 0.0), dim, f"{pth}.c", ()),
            f=_coef(c.get("f", 0.0), dim, f"{pth}.f", ()),
        )
        try:
            op = make_linear(coef, domain=(grid.lo, grid.hi))
        except ValueError as exc:
            raise ConfigError(pth, str(exc)) from None
    else:
        if oid not in catalog_ids():
            raise ConfigError("operator.id", f"unknown operator {oid!r}; known: {['zero', 'expr', *catalog_ids()]}")
        params = dict(_get(d, "params", "operator", dict, {}))
        for k, v in params.items():
            if isinstance(v, str):
                params[k] = _data_field(v, dim, f"operator.params.{k}")
        try:
            op = catalog_operator(oid, dim=dim, **params)
        except (TypeError, ValueError) as exc:
            raise ConfigError("operator", str(exc)) from None
    rep = check_proper(op, count=2000)
    if not rep.proper:
        raise ConfigError("operator", f"operator is not proper (witness {rep.witness})")
    return op


def scheme_params(cfg, seed):
    d = dict(_get(cfg, "scheme", "", dict, {}))
    known = {f.name for f in fields(SchemeParams)}
    for k in d:
        if k not in known:
            raise ConfigError(f"scheme.{k}", f"unknown scheme parameter; known: {sorted(known)}")
    d["seed"] = seed
    try:
        return SchemeParams(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError("scheme", str(exc)) from None


def grid_values(src, grid, path, t=0.0):
    return _expr(src, grid.dim, path)(grid.points(), t).reshape(grid.shape)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def fmt(v):
    return format(float(v), ".17g")


def write_grid_csv(path, u: GridFn, extra=None):
    grid = u.grid
    pts = grid.points()
    cols = [f"{AXES[a]}" if grid.dim <= 3 else f"x{a}" for a in range(grid.dim)]
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + ["u"] + list(extra))
        flat = np.asarray(u.values, float).reshape(-1)
        more = [np.asarray(v, float).reshape(-1) for v in extra.values()]
        for k in range(grid.size):
            w.writerow([fmt(c) for c in pts[k]] + [fmt(flat[k])] + [fmt(m[k]) for m in more])


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    return v


def write_summary(path, summary):
    # json writes the shortest repr, which round-trips every double exactly
    Path(path).write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _initial(cfg, section, grid, bc, path):
    src = section.get("initial")
    if src is None and bc is not None:
        conds = {id(c) for c in bc.faces.values()}
        first = next(iter(bc.faces.values()))
        if len(conds) == 1 and isinstance(first, Dirichlet):
            return np.asarray(first.data(grid.points()), float).reshape(grid.shape)
    return grid_values(0.0 if src is None else src, grid, f"{path}.initial")


def cmd_solve(cfg, out, seed):
    grid = build_grid(cfg)
    op = build_operator(cfg, grid)
    bc = build_boundary(cfg, grid.dim)
    sec = _get(cfg, "solve", "", dict, {})
    method = _get(sec, "method", "solve", str, "newton")
    tol = _get(sec, "tol", "solve", (int, float, type(None)), None)
    max_iter = _get(sec, "max_iter", "solve", (int, type(None)), None)
    params = scheme_params(cfg, seed)
    sch = discretize(op, grid, bc, params)
    init = _initial(cfg, sec, grid, bc, "solve")
    try:
        res = solve_fixed_point(sch, init, method=method, tol=tol, max_iter=max_iter)
    except ValueError as exc:
        raise ConfigError("solve", str(exc)) from None
    write_grid_csv(out / "solution.csv", res.u)
    write_rows(out / "iterations.csv", ["iter", "residual", "min", "max"], res.trace)
    v = res.u.values
    write_summary(
        out / "summary.json",
        {
            "command": "solve",
            "operator": op.name,
            "converged": res.converged,
            "residual": res.residual,
            "iters": res.iters,
            "min": float(np.min(v)),
            "max": float(np.max(v)),
            "comparison_warnings": res.warnings + sch.warnings,
        },
    )
    return EXIT_OK if res.converged else EXIT_NONCONV


def cmd_certify(cfg, out, seed):
    grid = build_grid(cfg)
    op = build_operator(cfg, grid)
    sec = _get(cfg, "certify", "", dict)
    u = GridFn(grid, grid_values(_get(sec, "function", "certify", (str, int, float)), grid, "certify.function"))
    side = _get(sec, "side", "certify", str, "solution")
    tol = _get(sec, "tol", "certify", (int, float, type(None)), None)
    bc = build_boundary(cfg, grid.dim) if sec.get("use_boundary", False) else None
    try:
        rep = certify(u, op, side=side, bc=bc, tol=tol)
    except ValueError as exc:
        raise ConfigError("certify", str(exc)) from None
    pts = grid.points()
    rows = []
    for node, jet, resid in rep.failures:
        k = int(np.ravel_multi_index(tuple(node), grid.shape))
        rows.append(list(node) + [fmt(c) for c in pts[k]] + [fmt(resid)])
    header = [f"i{a}" for a in range(grid.dim)] + [AXES[a] for a in range(grid.dim)] + ["residual"]
    write_rows(out / "certify_failures.csv", header, rows)
    write_summary(
        out / "summary.json",
        {
            "command": "certify",
            "operator": op.name,
            "side": side,
            "verdict": rep.verdict,
            "failures": len(rep.failures),
            "tested_nodes": rep.tested_nodes,
        },
    )
    return EXIT_OK if rep.verdict == "pass" else EXIT_CERT


def cmd_flow(cfg, out, seed):
    grid = build_grid(cfg)
    sec = _get(cfg, "flow", "", dict)
    T = _number(_get(sec, "T", "flow"), "flow.T")
    dt = _get(sec, "dt", "flow", (int, float, type(None)), None)
    sigma = _number(_get(sec, "sigma", "flow", (int, float), 0.5), "flow.sigma")
    snaps = _get(sec, "snapshots", "flow", (list, type(None)), None)
    mode = _get(sec, "mode", "flow", str, "scheme")
    psi = GridFn(grid, grid_values(_get(sec, "initial", "flow", (str, int, float)), grid, "flow.initial"))
    summary = {"command": "flow", "mode": mode}
    if mode == "mcf":
        try:
            res = mcf_evolve(psi, T, sigma=sigma, snapshots=snaps, dt=dt)
        except ValueError as exc:
            if isinstance(exc, CFLError):
                raise
            raise ConfigError("flow", str(exc)) from None
        states = res.states
        summary.update(dt=res.dt, steps=res.steps, extinction_time=res.extinction_time)
        summary["radii"] = [st.radius for st in states]
    elif mode == "scheme":
        op = build_operator(cfg, grid)
        bc = build_boundary(cfg, grid.dim)
        try:
            tg = TimeGrid(T, dt, sigma)
        except ValueError as exc:
            raise ConfigError("flow", str(exc)) from None
        try:
            states = evolve(op, psi, bc, tg, snapshots=snaps, params=scheme_params(cfg, seed))
        except ValueError as exc:
            if isinstance(exc, (CFLError, SchemeError)):
                raise
            raise ConfigError("flow", str(exc)) from None
        summary["operator"] = op.name
    else:
        raise ConfigError("flow.mode", f"unknown mode {mode!r}; use 'scheme' or 'mcf'")
    snapshots = []
    for k, st in enumerate(states):
        name = f"snapshot_{k:03d}.csv"
        write_grid_csv(out / name, st.u)
        snapshots.append({"t": st.t, "file": name, "min": float(np.min(st.u.values)), "max": float(np.max(st.u.values))})
    summary["snapshots"] = snapshots
    write_summary(out / "summary.json", summary)
    return EXIT_OK


def cmd_doubling(cfg, out, seed):
    grid = build_grid(cfg)
    sec = _get(cfg, "doubling", "", dict)
    u = GridFn(grid, grid_values(_get(sec, "u", "doubling", (str, int, float)), grid, "doubling.u"))
    v = GridFn(grid, grid_values(_get(sec, "v", "doubling", (str, int, float), 0.0), grid, "doubling.v"))
    if "alphas" in sec:
        alphas = [_number(a, f"doubling.alphas[{k}]") for k, a in enumerate(_get(sec, "alphas", "doubling", list))]
    else:
        alphas = [2.0**k for k in range(int(_get(sec, "k_max", "doubling", int, 8)) + 1)]
    form = _get(sec, "form", "doubling", str, "half")
    try:
        results = doubling_maximize(u, v, alphas, form=form)
    except ValueError as exc:
        raise ConfigError("doubling", str(exc)) from None
    checks = doubling_chain_checks(results)
    rows = []
    for r in results:
        rows.append([r.alpha] + [float(c) for c in r.xhat] + [float(c) for c in r.yhat] + [r.M_alpha, r.penalty, float(r.alpha * r.dist2_exact)])
    header = ["alpha"] + [f"xhat_{AXES[a]}" for a in range(grid.dim)] + [f"yhat_{AXES[a]}" for a in range(grid.dim)]
    write_rows(out / "doubling.csv", header + ["M_alpha", "penalty", "alpha_dist2"], rows)
    write_summary(out / "summary.json", {"command": "doubling", "form": form, "checks": checks})
    ok = all(bool(row[k]) for row in checks for k in ("nonincreasing", "penalty_bound") if k in row)
    return EXIT_OK if ok else EXIT_CERT


def cmd_supconv(cfg, out, seed):
    grid = build_grid(cfg)
    sec = _get(cfg, "supconv", "", dict)
    v = GridFn(grid, grid_values(_get(sec, "v", "supconv", (str, int, float)), grid, "supconv.v"))
    lams = _get(sec, "lam", "supconv", (list, int, float))
    lams = [_number(x, "supconv.lam") for x in (lams if isinstance(lams, list) else [lams])]
    sign = _get(sec, "sign", "supconv", str, "sup")
    if sign not in ("sup", "inf"):
        raise ConfigError("supconv.sign", "use 'sup' or 'inf'")
    conv = sup_convolve if sign == "sup" else inf_convolve
    entries = []
    ok = True
    for k, lam in enumerate(lams):
        try:
            sc = conv(v, lam)
        except ValueError as exc:
            raise ConfigError("supconv", str(exc)) from None
        w = np.asarray(sc.result.values, float)
        dom = bool(np.all(w >= v.values)) if sign == "sup" else bool(np.all(w <= v.values))
        defects = int(sum(len(d) for d in convexity_defects(sc)))
        ok &= dom and defects == 0
        name = f"supconv_{k:02d}.csv"
        write_grid_csv(out / name, GridFn(grid, v.values), {"regularized": w})
        entries.append({"lam": lam, "file": name, "dominates": dom, "convexity_defects": defects})
    write_summary(out / "summary.json", {"command": "supconv", "sign": sign, "results": entries})
    return EXIT_OK if ok else EXIT_CERT


def cmd_convergence(cfg, out, seed, refinements=None):
    sec = _get(cfg, "convergence", "", dict)
    oid = _get(sec, "oracle", "convergence", str)
    if oid not in CLOSED_FORMS:
        raise ConfigError("convergence.oracle", f"unknown oracle {oid!r}; known: {sorted(CLOSED_FORMS)}")
    oracle = closed_form(oid)
    oparams = _get(sec, "oracle_params", "convergence", dict, {})
    k = refinements if refinements is not None else int(_get(sec, "refinements", "convergence", int, 3))
    band = int(_get(sec, "exclude_band", "convergence", int, 0))
    base = build_grid(cfg)
    if base.dim != oracle.dim:
        raise ConfigError("convergence.oracle", f"oracle is {oracle.dim}-D, domain is {base.dim}-D")
    op = build_operator(cfg, base)
    bc = build_boundary(cfg, base.dim)
    ssec = _get(cfg, "solve", "", dict, {})
    method = _get(ssec, "method", "solve", str, "newton")
    tol = _get(ssec, "tol", "solve", (int, float, type(None)), None)
    params = scheme_params(cfg, seed)
    rows = []
    status = EXIT_OK
    for level in range(k):
        # halve the spacing: cells double, nodes n -> 2n - 1
        n = (base.n - 1) * 2**level + 1
        grid = Grid(base.lo, base.hi, n)
        sch = discretize(op, grid, bc, params)
        res = solve_fixed_point(sch, _initial(cfg, ssec, grid, bc, "solve"), method=method, tol=tol)
        if not res.converged:
            status = EXIT_NONCONV
        exact = np.asarray(oracle.evaluate(grid.points(), **oparams), float).reshape(grid.shape)
        err = np.abs(res.u.values - exact)
        if band:
            m = np.ones(grid.shape, bool)
            for a in range(grid.dim):
                idx = np.arange(grid.n[a])
                keep = (idx >= band) & (idx < grid.n[a] - band)
                sh = [1] * grid.dim
                sh[a] = -1
                m &= keep.reshape(sh)
            err = err[m]
        rows.append([int(np.prod(grid.n)), float(np.max(grid.h)), float(np.max(err)), res.residual, bool(res.converged)])
    errs = [r[2] for r in rows]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    write_rows(out / "convergence.csv", ["nodes", "h", "error", "residual", "converged"], rows)
    write_summary(
        out / "summary.json",
        {"command": "convergence", "oracle": oid, "errors": errs, "monotone_decreasing": monotone, "flagged": not monotone},
    )
    return status


DISPATCH = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "flow": cmd_flow,
    "doubling": cmd_doubling,
    "supconv": cmd_supconv,
    "convergence": cmd_convergence,
}


def build_parser():
    p = argparse.ArgumentParser(prog="viscsol", description="Monotone-scheme toolkit for degenerate elliptic and parabolic PDEs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=f"run the {name} pipeline")
        s.add_argument("--config", required=True, help="JSON problem config")
        s.add_argument("--out", default=".", help="output directory (created if missing)")
        s.add_argument("--seed", type=int, default=None, help="seed overriding the config")
        s.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto); never changes results")
        if name == "convergence":
            s.add_argument("--refinements", type=int, default=None, help="number of grid levels")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(_get(cfg, "seed", "", int, 0))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "convergence":
            return cmd_convergence(cfg, out, seed, args.refinements)
        return DISPATCH[args.command](cfg, out, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MonotonicityError, SchemeError) as exc:
        print(f"scheme rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CFLError as exc:
        print(f"CFL violation: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())
