"""Small arithmetic expression language for config data.

Expressions are parsed with :mod:`ast` and only a whitelist of node types is
accepted: numbers, the coordinates x, y, z and time t, the constants pi and e,
+ - * / ** and unary minus, and the functions exp, abs, sqrt, min, max, log,
sin, cos, tanh, clip.  Evaluation is vectorized over (m, N) point arrays.
"""

from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np


class ExprError(ValueError):
    pass


_FUNCS = {
    "exp": (1, np.exp),
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "log": (1, np.log),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tanh": (1, np.tanh),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
    "clip": (3, np.clip),
}
_CONSTS = {"pi": math.pi, "e": math.e}
_COORDS = ("x", "y", "z")
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _check(node, dim, src, extra=()):
    if isinstance(node, ast.Expression):
        return _check(node.body, dim, src, extra)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExprError(f"only numeric literals allowed in {src!r}")
        return
    if isinstance(node, ast.Name):
        if node.id in _CONSTS or node.id == "t" or node.id in extra:
            return
        if node.id in _COORDS:
            if _COORDS.index(node.id) >= dim:
                raise ExprError(f"coordinate {node.id!r} used in a {dim}-D problem: {src!r}")
            return
        raise ExprError(f"unknown name {node.id!r} in {src!r}")
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExprError(f"operator {type(node.op).__name__} not allowed in {src!r}")
        _check(node.left, dim, src, extra)
        _check(node.right, dim, src, extra)
        return
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExprError(f"unary {type(node.op).__name__} not allowed in {src!r}")
        _check(node.operand, dim, src, extra)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExprError(f"unknown function in {src!r}")
        arity = _FUNCS[node.func.id][0]
        if node.keywords or len(node.args) != arity:
            raise ExprError(f"{node.func.id} takes {arity} argument(s) in {src!r}")
        for a in node.args:
            _check(a, dim, src, extra)
        return
    raise ExprError(f"unsupported syntax {type(node).__name__} in {src!r}")


def _eval(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    fn = _FUNCS[node.func.id][1]
    return fn(*[_eval(a, env) for a in node.args])


class Expr:
    """Parsed expression; call with points (m, N), optional time t and extra variables."""

    def __init__(self, src, dim: int, variables=()):
        if isinstance(src, (int, float)) and not isinstance(src, bool):
            src = repr(float(src))
        if not isinstance(src, str):
            raise ExprError(f"expression must be a string or number, got {type(src).__name__}")
        self.src = src
        self.dim = int(dim)
        try:
            tree = ast.parse(src.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExprError(f"cannot parse {src!r}: {exc.msg}") from None
        self.variables = tuple(variables)
        _check(tree, self.dim, src, self.variables)
        self._body = tree.body

    def __call__(self, pts, t: float = 0.0, **values) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        env = {name: pts[:, k] for k, name in enumerate(_COORDS[: self.dim])}
        env["t"] = float(t)
        for name in self.variables:
            env[name] = values[name]
        with np.errstate(all="ignore"):
            out = _eval(self._body, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    def __repr__(self):
        return f"Expr({self.src!r})"


def compile_expr(src, dim: int, variables=()) -> Callable:
    return Expr(src, dim, variables)
