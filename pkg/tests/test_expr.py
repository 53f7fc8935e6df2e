import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viscsol.expr import Expr, ExprError, compile_expr


def test_basic_evaluation():
    f = compile_expr("x*y + 1", 2)
    pts = np.array([[1.0, 2.0], [0.5, -4.0]])
    assert np.array_equal(f(pts), [3.0, -1.0])
    assert compile_expr("clip(x, 0, 1)", 1)(np.array([[-1.0], [0.5], [2.0]])).tolist() == [0.0, 0.5, 1.0]
    assert compile_expr("sin(pi*x) + e", 1)(np.array([[0.5]]))[0] == pytest.approx(1 + math.e)
    assert compile_expr("t**2 - x", 1)(np.array([[1.0]]), t=3.0)[0] == 8.0


def test_numbers_broadcast():
    f = Expr(0.25, 3)
    assert np.array_equal(f(np.zeros((4, 3))), np.full(4, 0.25))
    assert repr(f) == "Expr('0.25')"


def test_extra_variables():
    f = compile_expr("px**2 - r", 1, variables=("px", "r"))
    assert f(np.zeros((2, 1)), px=np.array([2.0, 3.0]), r=np.array([1.0, 0.0])).tolist() == [3.0, 9.0]


@pytest.mark.parametrize(
    "src",
    [
        "__import__('os')",
        "x.real",
        "y",
        "foo(x)",
        "exp(x, 2)",
        "x if x else 1",
        "x < 1",
        "'a'",
        "True",
        "[x]",
        "lambda: 1",
        "x +",
        "x // 2",
        "not x",
    ],
)
def test_rejections(src):
    with pytest.raises(ExprError):
        compile_expr(src, 1)


def test_non_string_rejected():
    with pytest.raises(ExprError):
        Expr([1, 2], 1)
    with pytest.raises(ExprError):
        Expr(True, 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_matches_numpy(xs):
    pts = np.array(xs)[:, None]
    got = compile_expr("max(abs(x) - 1, 0) * exp(-x**2) + tanh(x)", 1)(pts)
    x = pts[:, 0]
    assert np.array_equal(got, np.maximum(np.abs(x) - 1, 0) * np.exp(-(x**2)) + np.tanh(x))
