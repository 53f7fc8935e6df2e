import math

import numpy as np
import pytest

from viscsol.analytic import (
    CLOSED_FORMS,
    closed_form,
    counterexample_branch,
    counterexample_residual,
    eikonal_exact,
    eikonal_kinks,
    eikonal_residual,
    extinction_time,
    neumann_exact,
    neumann_limit,
    neumann_residual,
    shrinking_radius,
)

X = np.linspace(0.05, 0.95, 19)


@pytest.mark.parametrize("eps", [0.1, 0.01, 0.003])
def test_neumann_solves_problem(eps):
    assert np.max(np.abs(neumann_residual(eps, X))) <= 1e-4
    assert abs(neumann_exact(eps, 0.0, deriv=1)) <= 1e-12
    assert abs(neumann_exact(eps, 1.0, deriv=1)) <= 1e-12


def test_neumann_small_eps_finite():
    u = neumann_exact(1e-4, np.linspace(0, 1, 101))
    assert np.all(np.isfinite(u))
    with pytest.raises(ValueError):
        neumann_exact(0.0, 0.5)
    with pytest.raises(ValueError):
        neumann_exact(0.1, 0.5, deriv=3)


def test_neumann_limit_values():
    assert neumann_limit(0.0) == 1.0
    assert neumann_limit(1.0) == pytest.approx(1.0 + math.exp(-1.0), abs=1e-15)
    # u' + u = x + 1
    assert np.allclose(neumann_limit(X, 1) + neumann_limit(X), X + 1.0, atol=1e-14)
    # away from the right boundary layer the viscous solution approaches the limit
    assert np.max(np.abs(neumann_exact(1e-3, X[X < 0.8]) - neumann_limit(X[X < 0.8]))) <= 5e-3


def test_counterexample_branch():
    assert counterexample_branch(0.5, 0.3) == 0.0
    assert counterexample_branch(-0.5, 1.0) == 1.0
    assert counterexample_branch(-1.0, 0.0) == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert abs(counterexample_residual(-0.7, 0.4)) <= 1e-8
    with pytest.raises(ValueError):
        counterexample_branch(0.0, 0.5)


def test_eikonal_forms():
    x = np.linspace(-0.9, 0.9, 10)
    assert np.array_equal(eikonal_kinks("neg", x), -np.abs(x))
    assert np.array_equal(eikonal_kinks("pos", x), np.abs(x))
    with pytest.raises(ValueError):
        eikonal_kinks("zero", x)
    assert eikonal_exact(1.0) == 0.0 and eikonal_exact(0.0) == pytest.approx(1 - math.exp(-1))
    assert np.max(np.abs(eikonal_residual(x))) <= 1e-8


def test_mcf_radius_formulas():
    assert shrinking_radius(1.0, 0.25) == pytest.approx(math.sqrt(0.5))
    assert shrinking_radius(1.0, 0.125, N=3) == pytest.approx(math.sqrt(0.5))
    assert extinction_time(0.8) == pytest.approx(0.32)
    assert extinction_time(1.0, N=3) == 0.25
    with pytest.raises(ValueError):
        shrinking_radius(1.0, 1.0)
    with pytest.raises(ValueError):
        shrinking_radius(1.0, 0.1, N=1)


@pytest.mark.parametrize("cid", sorted(CLOSED_FORMS))
def test_closed_form_registry(cid):
    cf = closed_form(cid)
    lo, hi = np.asarray(cf.domain[0]), np.asarray(cf.domain[1])
    pts = lo + (hi - lo) * np.array([[0.3] * cf.dim, [0.7] * cf.dim])
    vals = cf.evaluate(pts)
    assert np.shape(vals) == (2,) and np.all(np.isfinite(vals))


def test_closed_form_unknown():
    with pytest.raises(KeyError):
        closed_form("nope")
