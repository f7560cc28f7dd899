"""Pure NumPy versions of the per-sample kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature. Arrays are float64 and C-contiguous, column indices are int64.
"""

import numpy as np


def left_step(V, core, col):
    """Push row vectors one core to the right.

    ``out[s, b] = sum_a V[s, a] * core[a, col[s], b]``
    """
    G = core.transpose(1, 0, 2)[col]  # (m, a, b)
    return np.matmul(V[:, None, :], G)[:, 0, :]


def right_step(core, col, V):
    """Push column vectors one core to the left.

    ``out[s, a] = sum_b core[a, col[s], b] * V[s, b]``
    """
    G = core.transpose(1, 0, 2)[col]
    return np.matmul(G, V[:, :, None])[:, :, 0]


def core_values(L, core, R, col):
    """``out[s] = L[s] @ core[:, col[s], :] @ R[s]``."""
    return np.einsum("mb,mb->m", left_step(L, core, col), R)


def _grouped(key, nkeys):
    order = np.argsort(key, kind="stable")
    bounds = np.searchsorted(key[order], np.arange(nkeys + 1))
    return order, bounds


def accumulate_core(L, R, y, col, n):
    """Sum of rank-one sample contributions into an order-3 core.

    ``out[a, col[s], b] += y[s] * L[s, a] * R[s, b]``
    """
    rl, rr = L.shape[1], R.shape[1]
    out = np.zeros((n, rl, rr))
    order, bounds = _grouped(col, n)
    Ls = L[order]
    Rs = R[order] * y[order, None]
    for k in range(n):
        lo, hi = bounds[k], bounds[k + 1]
        if hi > lo:
            out[k] = Ls[lo:hi].T @ Rs[lo:hi]
    return np.ascontiguousarray(out.transpose(1, 0, 2))


def accumulate_pair(L, R, y, col1, col2, n1, n2):
    """Two-mode version of :func:`accumulate_core`.

    ``out[a, col1[s], col2[s], b] += y[s] * L[s, a] * R[s, b]``
    """
    rl, rr = L.shape[1], R.shape[1]
    key = col1 * n2 + col2
    out = np.zeros((n1 * n2, rl, rr))
    order, bounds = _grouped(key, n1 * n2)
    Ls = L[order]
    Rs = R[order] * y[order, None]
    for k in range(n1 * n2):
        lo, hi = bounds[k], bounds[k + 1]
        if hi > lo:
            out[k] = Ls[lo:hi].T @ Rs[lo:hi]
    out = out.reshape(n1, n2, rl, rr)
    return np.ascontiguousarray(out.transpose(2, 0, 1, 3))
