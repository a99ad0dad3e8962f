import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specaug import _pykernels, kernels

from conftest import random_graph

needs_compiled = pytest.mark.skipif("cython" not in kernels.available_backends(),
                                    reason="compiled kernels not built")


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.get_backend("python") is _pykernels


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_use_backend_switches_and_restores():
    before = kernels.backend_name()
    kernels.use_backend("python")
    assert kernels.backend_name() == "python"
    kernels.use_backend(before)
    assert kernels.backend_name() == before


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(st.integers(1, 80), st.integers(0, 250), st.integers(0, 2 ** 32 - 1))
def test_backends_agree(n, m, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m, loops=bool(seed % 2))
    c, p = kernels.get_backend("cython"), kernels.get_backend("python")
    args = (g.row_offsets, g.col_indices)
    start = int(rng.integers(n))
    radius = int(rng.integers(0, 4))
    assert np.array_equal(c.bfs_ball(*args, start, radius), p.bfs_ball(*args, start, radius))
    ru, su = rng.random(64), rng.random(64)
    ret = float(rng.random())
    cap = int(rng.integers(1, 20))
    assert np.array_equal(c.random_walk_visit(*args, start, ru, su, ret, cap),
                          p.random_walk_visit(*args, start, ru, su, ret, cap))
    nodes = rng.permutation(n)[:int(rng.integers(1, n + 1))]
    for a, b in zip(c.induced_csr(*args, nodes), p.induced_csr(*args, nodes)):
        assert np.array_equal(a, b)
    assert np.array_equal(c.component_labels(*args), p.component_labels(*args))


@pytest.mark.parametrize("name", kernels.available_backends())
def test_kernels_return_int64(name):
    k = kernels.get_backend(name)
    g = random_graph(np.random.default_rng(0), 10, 20)
    args = (g.row_offsets, g.col_indices)
    assert k.bfs_ball(*args, 0, 2).dtype == np.int64
    assert k.component_labels(*args).dtype == np.int64
    off, cols = k.induced_csr(*args, np.array([3, 1, 2]))
    assert off.dtype == np.int64 and cols.dtype == np.int64
