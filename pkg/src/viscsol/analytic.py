"""Closed-form reference solutions used as oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np


@dataclass(frozen=True)
class ClosedForm:
    id: str
    dim: int
    evaluate: Callable
    description: str
    domain: tuple = ((0.0,), (1.0,))


def _neumann_coeffs(eps):
    if not eps > 0:
        raise ValueError("eps must be positive")
    root = math.sqrt(1.0 + 4.0 * eps)
    lp = (1.0 + root) / (2.0 * eps)
    lm = -2.0 / (1.0 + root)  # (1 - root) / (2 eps) without cancellation
    return lp, lm


def neumann_exact(eps, x, deriv=0):
    """Solution of -eps u'' + u' + u = x + 1 on [0,1] with u'(0) = u'(1) = 0.

    u = x + A e^{lp x} + B e^{lm x} with
    A = (e^{lm} - 1) / (lp (e^{lp} - e^{lm})),  B = (1 - e^{lp}) / (lm (e^{lp} - e^{lm})),
    lp, lm = (1 +- sqrt(1 + 4 eps)) / (2 eps).
    The exponentials are rescaled by e^{-lp} so small eps does not overflow.
    deriv selects u, u' or u''.
    """
    lp, lm = _neumann_coeffs(eps)
    x = np.asarray(x, dtype=float)
    den = 1.0 - math.exp(lm - lp)  # (e^{lp} - e^{lm}) e^{-lp}
    a = math.expm1(lm) / (lp * den)  # A e^{lp}
    b = math.expm1(-lp) / (lm * den)  # B
    e_p = np.exp(lp * (x - 1.0))
    e_m = np.exp(lm * x)
    if deriv == 0:
        return x + a * e_p + b * e_m
    if deriv == 1:
        return 1.0 + a * lp * e_p + b * lm * e_m
    if deriv == 2:
        return a * lp * lp * e_p + b * lm * lm * e_m
    raise ValueError("deriv must be 0, 1 or 2")


def neumann_limit(x, deriv=0):
    """x + e^{-x}, the vanishing-viscosity limit; it solves u' + u = x + 1."""
    x = np.asarray(x, dtype=float)
    if deriv == 0:
        return x + np.exp(-x)
    if deriv == 1:
        return 1.0 - np.exp(-x)
    if deriv == 2:
        return np.exp(-x)
    raise ValueError("deriv must be 0, 1 or 2")


def counterexample_branch(x, y):
    """Solution branches of u + x u_y = 0 with data 0 at y = 0 and 1 at y = 1.

    0 for x > 0 and exp((1 - y) / x) for x < 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x == 0):
        raise ValueError("x must be nonzero")
    with np.errstate(over="ignore", divide="ignore"):
        neg = np.exp((1.0 - y) / np.where(x < 0, x, -1.0))
    out = np.where(x > 0, 0.0, neg)
    return out if out.ndim else float(out)


def eikonal_kinks(variant, x):
    """The |x| family: 'neg' is -|x|, 'pos' is |x|.

    -|x| solves (u')^2 - 1 = 0 and |x| solves -(u')^2 + 1 = 0 in the
    viscosity sense; the roles do not swap.
    """
    x = np.asarray(x, dtype=float)
    if variant in ("neg", "minus"):
        return -np.abs(x)
    if variant in ("pos", "plus"):
        return np.abs(x)
    raise ValueError("variant must be 'neg' or 'pos'")


def eikonal_exact(x):
    """1 - e^{|x|-1}: solution of u + |u'| = 1 on (-1,1) with zero boundary data."""
    x = np.asarray(x, dtype=float)
    return 1.0 - np.exp(np.abs(x) - 1.0)


def shrinking_radius(R0, t, N=2):
    """Radius of a sphere moving by mean curvature: sqrt(R0^2 - 2 (N-1) t)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    t = np.asarray(t, dtype=float)
    s = R0 * R0 - 2.0 * (N - 1) * t
    if np.any(s < 0):
        raise ValueError("t beyond extinction time")
    out = np.sqrt(s)
    return out if out.ndim else float(out)


def extinction_time(R0, N=2):
    return R0 * R0 / (2.0 * (N - 1))


# ---------------------------------------------------------------------------
# registry and residual self-checks
# ---------------------------------------------------------------------------


def _fd(f, x, k, h=1e-5):
    if k == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)


def neumann_residual(eps, x, h=1e-5):
    """-eps u'' + u' + u - (x+1) with centered differences of the closed form."""
    f = lambda s: neumann_exact(eps, s)
    return -eps * _fd(f, x, 2, h) + _fd(f, x, 1, h) + f(x) - (x + 1.0)


def counterexample_residual(x, y, h=1e-5):
    """v + x v_y along a vertical slice, by centered differences."""
    f = lambda s: counterexample_branch(x, s)
    return counterexample_branch(x, y) + x * _fd(f, y, 1, h)


def eikonal_residual(x, h=1e-5):
    f = eikonal_exact
    return f(x) + np.abs(_fd(f, x, 1, h)) - 1.0


CLOSED_FORMS: Dict[str, ClosedForm] = {
    "neumann-exact": ClosedForm(
        "neumann-exact",
        1,
        lambda pts, eps=0.01: neumann_exact(eps, np.asarray(pts)[..., 0]),
        "viscous Neumann boundary-layer problem -eps u'' + u' + u = x + 1",
    ),
    "neumann-limit": ClosedForm(
        "neumann-limit", 1, lambda pts: neumann_limit(np.asarray(pts)[..., 0]), "vanishing-viscosity limit x + e^{-x}"
    ),
    "eikonal": ClosedForm(
        "eikonal",
        1,
        lambda pts: eikonal_exact(np.asarray(pts)[..., 0]),
        "u + |u'| = 1 on (-1,1), zero boundary data",
        ((-1.0,), (1.0,)),
    ),
    "abs-neg": ClosedForm(
        "abs-neg", 1, lambda pts: eikonal_kinks("neg", np.asarray(pts)[..., 0]), "-|x|", ((-1.0,), (1.0,))
    ),
    "abs-pos": ClosedForm(
        "abs-pos", 1, lambda pts: eikonal_kinks("pos", np.asarray(pts)[..., 0]), "|x|", ((-1.0,), (1.0,))
    ),
    "counterexample": ClosedForm(
        "counterexample",
        2,
        lambda pts: counterexample_branch(np.asarray(pts)[..., 0], np.asarray(pts)[..., 1]),
        "u + x u_y = 0 on (-1,1)x(0,1), branches for x != 0",
        ((-1.0, 0.0), (1.0, 1.0)),
    ),
}


def closed_form(id_: str) -> ClosedForm:
    try:
        return CLOSED_FORMS[id_]
    except KeyError:
        raise KeyError(f"unknown closed form {id_!r}; known: {sorted(CLOSED_FORMS)}") from None
