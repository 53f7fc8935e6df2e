import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viscsol import _kernels_py as pure
from viscsol import kernels

try:
    from viscsol import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def same(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        b = np.asarray(b)
        return a.shape == b.shape and a.dtype == b.dtype and np.array_equal(a.view(np.uint8), b.view(np.uint8))
    return a == b


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
    assert (kernels.BACKEND == "cython") == (compiled is not None and os.environ.get("VISCSOL_PURE_PYTHON", "") == "")


def test_pure_python_override():
    code = "import viscsol.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, VISCSOL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pure_sup_conv_small():
    vals = np.array([[0.0, 1.0, 0.0, -np.inf, 0.5]])
    out, arg, count = pure.sup_conv_1d(vals, 0.25, 2)
    assert out[0].tolist() == [0.75, 1.0, 0.75, 0.25, 0.5]
    assert arg[0, 0] == 1 and count[0, 1] == 1


def test_pure_pair_candidates_brute_force():
    rng = np.random.default_rng(0)
    xs = rng.normal(size=(30, 2))
    ys = rng.normal(size=(25, 2))
    u, v = rng.normal(size=30), rng.normal(size=25)
    best, i, j, ci, cj = pure.pair_candidates(u, v, xs, ys, 1.5, 0.0)
    phi = u[:, None] - v[None, :] - 1.5 * ((xs[:, None, :] - ys[None, :, :]) ** 2).sum(-1)
    assert best == phi.max() and (i, j) == np.unravel_index(np.argmax(phi), phi.shape)


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_pair_candidates_identical(seed, dim):
    rng = np.random.default_rng(seed)
    xs, ys = rng.normal(size=(40, dim)), rng.normal(size=(33, dim))
    u, v = rng.normal(size=40), rng.normal(size=33)
    args = (u, v, xs, ys, float(rng.uniform(0.1, 10)), 1e-3)
    assert same(pure.pair_candidates(*args), compiled.pair_candidates(*args))


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sup_conv_identical(seed):
    rng = np.random.default_rng(seed)
    vals = np.round(rng.normal(size=(3, 50)), 2)
    vals[rng.random(vals.shape) < 0.1] = -np.inf
    c = float(rng.integers(1, 64)) * 2.0**-6
    K = int(rng.integers(0, 12))
    assert same(pure.sup_conv_1d(vals, c, K), compiled.sup_conv_1d(vals, c, K))


@needs_ext
@pytest.mark.parametrize("dim", [2, 3])
def test_mcf_identical(dim):
    n = 41 if dim == 2 else 17
    ax = np.linspace(-1, 1, n)
    grids = np.meshgrid(*([ax] * dim), indexing="ij")
    u = np.sqrt(sum(g**2 for g in grids)) - 0.5 + 0.01 * np.sin(7 * grids[0])
    h = float(ax[1] - ax[0])
    dt = h * h / (8 * dim)
    pf, cf = (pure.mcf_step_2d, compiled.mcf_step_2d) if dim == 2 else (pure.mcf_step_3d, compiled.mcf_step_3d)
    a, b = u, u
    for _ in range(5):
        a, b = pf(a, h, dt, 1e-10), cf(b, h, dt, 1e-10)
        assert same(a, np.asarray(b))
