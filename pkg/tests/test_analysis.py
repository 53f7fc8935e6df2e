from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viscsol.analysis import (
    NonUniqueMaximizer,
    convexity_defects,
    doubling_chain_checks,
    doubling_maximize,
    inf_convolve,
    magic_identity_check,
    matrix_doubling_bound_check,
    sup_convolve,
)
from viscsol.core import Grid, GridFn

G = Grid([-1.0], [1.0], 101)
ALPHAS = [2.0**k for k in range(9)]


def test_doubling_equal_functions():
    u = G.sample(lambda p: np.cos(p[:, 0]))
    for r in doubling_maximize(u, u, ALPHAS):
        assert r.M_exact >= 0
        # off-diagonal pairs lose once alpha h / 2 exceeds the Lipschitz constant
        if r.alpha * float(G.h[0]) / 2 > 1.0:
            assert r.xhat == r.yhat
            assert r.M_alpha == 0.0 and r.M_exact == 0


def test_doubling_parabola():
    u = G.sample(lambda p: 1.0 - p[:, 0] ** 2)
    v = GridFn(G, np.zeros(G.shape))
    rs = doubling_maximize(u, v, ALPHAS)
    assert all(b.M_exact <= a.M_exact for a, b in zip(rs, rs[1:]))
    assert rs[-1].M_alpha == pytest.approx(1.0, abs=1e-12)
    assert np.sqrt(float(rs[-1].dist2_exact)) <= 2 / np.sqrt(rs[-1].alpha)
    for r in rs:
        assert r.M_exact == Fraction(u[r.xhat]) - Fraction(v[r.yhat]) - r.penalty_exact


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["half", "full"]))
def test_doubling_chain_random(seed, form):
    rng = np.random.default_rng(seed)
    g = Grid([0.0], [1.0], 31)
    u = GridFn(g, rng.normal(size=31))
    v = GridFn(g, rng.normal(size=31))
    rs = doubling_maximize(u, v, ALPHAS, form=form)
    for row in doubling_chain_checks(rs):
        assert row["nonincreasing"]
        assert row["penalty_bound"]


def test_doubling_errors():
    u = G.sample(lambda p: p[:, 0])
    with pytest.raises(ValueError):
        doubling_maximize(u, GridFn(Grid([0.0], [1.0], 101), np.zeros(101)), ALPHAS)
    with pytest.raises(ValueError):
        doubling_maximize(u, u, [2.0, 1.0])
    with pytest.raises(ValueError):
        doubling_maximize(u, u, ALPHAS, form="third")


def test_matrix_bound_examples():
    z = np.zeros((2, 2))
    assert matrix_doubling_bound_check(z, z, 1.0)
    assert not matrix_doubling_bound_check(3 * np.eye(2), -3 * np.eye(2), 1.0)
    with pytest.raises(ValueError):
        matrix_doubling_bound_check(np.eye(2), np.eye(3), 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matrix_bound_implies_order(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2))
    X = A + A.T
    Y = X + np.diag(rng.uniform(0, 1, 2))
    alpha = float(rng.uniform(0.5, 5))
    # the helper asserts X <= Y internally whenever the sandwich holds
    matrix_doubling_bound_check(X, Y, alpha)


G4 = Grid([-4.0], [4.0], 801)


def test_sup_convolution_constant_and_abs():
    c = GridFn(G4, np.full(G4.shape, 0.75))
    assert np.all(sup_convolve(c, 1.0).result.values == 0.75)
    v = G4.sample(lambda p: -np.abs(p[:, 0]))
    sc = sup_convolve(v, 1.0)
    # the penalty weight is quantized, so lambda is effectively lam_axes
    lam = sc.lam_axes[0]
    assert abs(lam - 1.0) <= 1e-4
    assert sc.result.values[G4.locate([2.0])] == pytest.approx(-2.0 + 1 / (2 * lam), abs=1e-9 + lam * float(G4.h[0]) ** 2)
    assert sc.result.values[G4.locate([2.0])] == pytest.approx(-1.5, abs=1e-5)
    assert sc.result.values[G4.locate([0.0])] == 0.0


def test_sup_convolution_properties():
    rng = np.random.default_rng(3)
    v = GridFn(G, rng.normal(size=G.shape))
    a, b = sup_convolve(v, 2.0), sup_convolve(v, 8.0)
    assert np.all(a.result.values >= b.result.values)
    assert np.all(b.result.values >= v.values)
    assert all(len(d) == 0 for d in convexity_defects(a))
    low = inf_convolve(v, 2.0)
    assert np.all(low.result.values <= v.values)
    back = sup_convolve(GridFn(G, -inf_convolve(GridFn(G, -v.values), 2.0).result.values), 2.0)
    assert np.all(back.result.values >= v.values)


def test_magic_identity():
    c = GridFn(G4, np.full(G4.shape, 0.5))
    rep = magic_identity_check(sup_convolve(c, 1.0), (400,))
    assert np.all(rep.q == 0) and rep.identity_residual == 0
    v = G4.sample(lambda p: -np.abs(p[:, 0]))
    sc = sup_convolve(v, 1.0)
    rep = magic_identity_check(sc, G4.locate([2.0]))
    assert rep.identity_residual == 0
    assert rep.q[0] == pytest.approx(sc.lam_axes[0] * (G4.node(rep.y)[0] - 2.0), rel=1e-12)
    assert rep.jet_membership


def test_magic_identity_nonunique():
    g = Grid([-1.0], [1.0], 21)
    v = g.sample(lambda p: np.where(np.abs(p[:, 0]) > 0.45, 1.0, 0.0))
    with pytest.raises(NonUniqueMaximizer):
        magic_identity_check(sup_convolve(v, 1.0), (10,))
