import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from viscsol.core import (
    EvaluationError,
    Grid,
    GridFn,
    Jet,
    OperatorSpec,
    SymMatrix,
    check_gamma,
    check_proper,
    lsc_envelope,
    relaxed_liminf,
    relaxed_limsup,
    usc_envelope,
)
from viscsol.analytic import neumann_exact, neumann_limit
from viscsol.operators import catalog_ids, catalog_operator, make_max_eigenvalue


def test_symmatrix_rejects_asymmetric():
    with pytest.raises(ValueError):
        SymMatrix([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        SymMatrix(np.ones((2, 3)))


def test_symmatrix_order_and_norm():
    a = SymMatrix(np.diag([1.0, -3.0]))
    assert a.norm() == 3.0
    assert a.trace() == -2.0
    assert a <= SymMatrix.identity(2)
    assert not (SymMatrix.identity(2) <= a)
    assert SymMatrix.zeros(2) <= SymMatrix(np.diag([0.0, 1.0]))


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-5, 5)))
def test_symmatrix_antisymmetry_of_order(m):
    a = SymMatrix(m + m.T)
    b = SymMatrix(m + m.T + 1e-14 * np.eye(3))
    if a <= b and b <= a:
        assert (a - b).norm() <= 1e-10


def test_jet_dimension_check():
    with pytest.raises(ValueError):
        Jet([0.0, 1.0], np.eye(3))
    j = Jet([1.0], [[2.0]])
    assert (-j).p[0] == -1.0 and j.scaled(2).X.entries[0, 0] == 4.0


def test_grid_symmetric_coordinates():
    g = Grid([-1.0], [1.0], 201)
    x = g.axes[0]
    assert np.array_equal(x, -x[::-1])
    assert x[100] == 0.0
    g2 = Grid([-1.0, 0.0], [1.0, 1.0], [11, 5])
    assert g2.shape == (11, 5) and g2.size == 55
    assert g2.locate([0.0, 1.0]) == (5, 4)
    assert g2.boundary_mask().sum() == 55 - 9 * 3


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid([0.0], [1.0], 1)
    with pytest.raises(ValueError):
        Grid([1.0], [0.0], 5)


def test_gridfn_rejects_nan_and_unflagged_inf():
    g = Grid([0.0], [1.0], 3)
    with pytest.raises(ValueError):
        GridFn(g, [0.0, np.nan, 1.0])
    with pytest.raises(ValueError):
        GridFn(g, [0.0, -np.inf, 1.0])
    assert GridFn(g, [0.0, -np.inf, 1.0], extended=True).extended


# properness -----------------------------------------------------------------


def test_proper_linear_trace():
    op = OperatorSpec(2, lambda x, r, p, X: -np.trace(X, axis1=1, axis2=2) + r)
    assert check_proper(op, count=10_000).proper


def test_improper_witness_has_negative_p():
    op = OperatorSpec(1, lambda x, r, p, X: r * p[:, 0] - x[:, 0])
    rep = check_proper(op, count=10_000, seed=3)
    assert not rep.proper
    assert rep.witness["p"][0] < 0
    assert rep.witness["r"] <= rep.witness["s"]


def test_max_eigenvalue_proper():
    assert check_proper(make_max_eigenvalue(2), count=10_000).proper


def test_check_proper_deterministic():
    op = OperatorSpec(1, lambda x, r, p, X: r * p[:, 0])
    a = check_proper(op, count=500, seed=7)
    b = check_proper(op, count=500, seed=7)
    assert a.witness["p"][0] == b.witness["p"][0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_check_proper_nonfinite():
    op = OperatorSpec(1, lambda x, r, p, X: np.log(r))
    with pytest.raises(EvaluationError) as exc:
        check_proper(op, count=100)
    assert exc.value.point is not None
    with pytest.raises(ValueError):
        check_proper(op, count=0)


@pytest.mark.parametrize("oid", catalog_ids())
def test_catalog_proper(oid):
    assert check_proper(catalog_operator(oid), count=10_000, seed=0).proper


def test_check_gamma():
    op = OperatorSpec(1, lambda x, r, p, X: 2.0 * r + p[:, 0] ** 2)
    assert check_gamma(op, 2.0)
    assert not check_gamma(op, 2.5)


# envelopes -------------------------------------------------------------------


def test_envelope_constant():
    g = Grid([-1.0, -1.0], [1.0, 1.0], 9)
    u = GridFn(g, np.full(g.shape, 3.5))
    assert np.array_equal(usc_envelope(u).values, u.values)
    assert np.array_equal(lsc_envelope(u).values, u.values)


def test_envelope_spike():
    g = Grid([-1.0], [1.0], 21)
    v = np.zeros(21)
    v[10] = 1.0
    u = GridFn(g, v)
    assert np.array_equal(usc_envelope(u).values, u.values)
    lo = lsc_envelope(u)
    assert np.all(lo.values <= u.values)
    assert np.array_equal(lsc_envelope(lo).values, lo.values)


def test_envelope_sign():
    g = Grid([-1.0], [1.0], 21)
    u = g.sample(lambda p: np.sign(p[:, 0]))
    assert usc_envelope(u).values[10] == 1.0
    assert lsc_envelope(u).values[10] == -1.0


@settings(max_examples=60, deadline=None)
@given(arrays(float, (7, 6), elements=st.floats(-10, 10, allow_subnormal=False)))
def test_envelope_order_duality_idempotence(v):
    g = Grid([0.0, 0.0], [1.0, 1.0], [7, 6])
    u = GridFn(g, v)
    up, lo = usc_envelope(u), lsc_envelope(u)
    assert np.all(lo.values <= u.values) and np.all(u.values <= up.values)
    assert np.array_equal(lo.values, -usc_envelope(GridFn(g, -v)).values)
    assert np.array_equal(usc_envelope(up).values, up.values)


def test_relaxed_limits_constant_sequence():
    g = Grid([-1.0], [1.0], 21)
    u = g.sample(lambda p: np.sign(p[:, 0]))
    assert np.array_equal(relaxed_limsup([u] * 5).values, usc_envelope(u).values)


def test_relaxed_limits_decaying_oscillation():
    g = Grid([-1.0], [1.0], 201)
    seq = [g.sample(lambda p, n=n: np.sin(n * p[:, 0]) / n) for n in range(1, 41)]
    up = relaxed_limsup(seq)
    lo = relaxed_liminf(seq)
    assert np.all(lo.values <= up.values)
    n_tail = 40 - 10 + 1
    assert np.max(np.abs(up.values)) <= 1.0 / n_tail + 1e-12


def test_relaxed_limits_duality_and_errors():
    g = Grid([0.0], [1.0], 11)
    rng = np.random.default_rng(0)
    seq = [GridFn(g, rng.normal(size=11)) for _ in range(8)]
    neg = [GridFn(g, -s.values) for s in seq]
    assert np.array_equal(relaxed_limsup(seq).values, -relaxed_liminf(neg).values)
    with pytest.raises(ValueError):
        relaxed_limsup([])
    with pytest.raises(ValueError):
        relaxed_limsup([seq[0], GridFn(Grid([0.0], [2.0], 11), np.zeros(11))])


def test_relaxed_limit_vanishing_viscosity():
    g = Grid([0.0], [1.0], 201)
    seq = [g.sample(lambda p, e=e: neumann_exact(e, p[:, 0])) for e in (0.1, 0.03, 0.01, 0.003, 0.001, 0.0003)]
    lim = relaxed_liminf(seq, tail=1)
    x = g.axes[0]
    keep = x <= 0.95
    assert np.max(np.abs(lim.values[keep] - neumann_limit(x[keep]))) <= 0.01
