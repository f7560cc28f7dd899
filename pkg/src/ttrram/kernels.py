"""Per-sample kernels with backend selection.

The compiled extension ``ttrram._ckernels`` is used when it is importable;
otherwise the NumPy implementation in ``ttrram._kernels_py`` is used. Set the
environment variable ``TTRRAM_PURE_PYTHON=1`` to force the NumPy backend.

The wrappers below normalise dtypes and memory layout so that both backends
see identical inputs.
"""

import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("TTRRAM_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def left_step(V, core, col, impl=None):
    return (impl or _impl).left_step(_f(V), _f(core), _i(col))


def right_step(core, col, V, impl=None):
    return (impl or _impl).right_step(_f(core), _i(col), _f(V))


def core_values(L, core, R, col, impl=None):
    return (impl or _impl).core_values(_f(L), _f(core), _f(R), _i(col))


def accumulate_core(L, R, y, col, n, impl=None):
    return (impl or _impl).accumulate_core(_f(L), _f(R), _f(y), _i(col), int(n))


def accumulate_pair(L, R, y, col1, col2, n1, n2, impl=None):
    return (impl or _impl).accumulate_pair(
        _f(L), _f(R), _f(y), _i(col1), _i(col2), int(n1), int(n2)
    )


def left_interfaces(cores, idx, impl=None):
    """Prefix products of ``cores`` evaluated at the sample indices.

    Returns a list ``L`` of length ``len(cores) + 1`` where ``L[k]`` has shape
    ``(m, r_k)`` and holds ``cores[0][:, i_0, :] @ ... @ cores[k-1][:, i_{k-1}, :]``
    for every sample. ``L[0]`` is a column of ones.
    """
    idx = _i(idx)
    L = [np.ones((idx.shape[0], 1))]
    for k, core in enumerate(cores):
        L.append(left_step(L[-1], core, idx[:, k], impl=impl))
    return L


def right_interfaces(cores, idx, impl=None):
    """Suffix products; ``R[k]`` has shape ``(m, r_{k})`` and covers cores ``k..d-1``.

    ``R[d]`` is a column of ones, so the suffix strictly right of core ``k``
    is ``R[k + 1]``.
    """
    idx = _i(idx)
    d = len(cores)
    R = [None] * (d + 1)
    R[d] = np.ones((idx.shape[0], 1))
    for k in range(d - 1, -1, -1):
        R[k] = right_step(cores[k], idx[:, k], R[k + 1], impl=impl)
    return R


def gather(cores, idx, impl=None):
    """Entries of the TT with the given cores at the sample indices."""
    idx = _i(idx)
    if idx.shape[0] == 0:
        return np.zeros(0)
    V = np.ones((idx.shape[0], 1))
    for k, core in enumerate(cores):
        V = left_step(V, core, idx[:, k], impl=impl)
    return V[:, 0]
