"""Backend selection for the graph traversal kernels.

The compiled extension is used when it has been built; otherwise the
pure-Python module is loaded. ``use_backend`` switches explicitly, which
the tests and the benchmark use to compare both.
"""
from specaug import _pykernels

try:
    from specaug import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_active = _ckernels if _ckernels is not None else _pykernels


def available_backends():
    return ["cython", "python"] if _ckernels is not None else ["python"]


def backend_name():
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def get_backend(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `python setup.py build_ext --inplace`")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def use_backend(name):
    """Select the backend used by every later traversal call."""
    global _active
    _active = get_backend(name)


def bfs_ball(row_offsets, col_indices, center, radius):
    return _active.bfs_ball(row_offsets, col_indices, center, radius)


def random_walk_visit(row_offsets, col_indices, start, restart_u, step_u, return_prob, max_nodes):
    return _active.random_walk_visit(row_offsets, col_indices, start, restart_u, step_u,
                                     return_prob, max_nodes)


def induced_csr(row_offsets, col_indices, nodes):
    return _active.induced_csr(row_offsets, col_indices, nodes)


def component_labels(row_offsets, col_indices):
    return _active.component_labels(row_offsets, col_indices)


__all__ = [
    "available_backends", "backend_name", "get_backend", "use_backend",
    "bfs_ball", "random_walk_visit", "induced_csr", "component_labels",
]
