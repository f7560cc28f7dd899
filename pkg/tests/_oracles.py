"""Independent dense reference implementations for the tests.

Everything here works entry by entry or through explicit index sums, so it
shares no code path with the package.
"""

import itertools

import numpy as np


def tt_entry(cores, idx):
    """Element formula: product of the core slices selected by ``idx``."""
    v = np.ones((1, 1))
    for c, i in zip(cores, idx):
        v = v @ c[:, i, :]
    return float(v[0, 0])


def tt_dense(cores):
    shape = tuple(c.shape[1] for c in cores)
    out = np.empty(shape)
    for idx in itertools.product(*(range(n) for n in shape)):
        out[idx] = tt_entry(cores, idx)
    return out


def random_cores(rng, shape, ranks):
    full = (1,) + tuple(ranks) + (1,)
    return [rng.standard_normal((full[k], n, full[k + 1])) for k, n in enumerate(shape)]


def jacobian(cores):
    """Columns: derivative of the dense tensor with respect to each core entry."""
    cols = []
    for k, c in enumerate(cores):
        for pos in np.ndindex(*c.shape):
            e = np.zeros_like(c)
            e[pos] = 1.0
            cols.append(tt_dense(cores[:k] + [e] + cores[k + 1 :]).ravel())
    return np.array(cols).T


def tangent_projector(cores):
    """Orthogonal projector onto the column span of the Jacobian."""
    J = jacobian(cores)
    U, s, _ = np.linalg.svd(J, full_matrices=False)
    keep = s > 1e-10 * s[0]
    Q = U[:, keep]
    return Q @ Q.T


def left_matrix(cores, k):
    """Rows indexed by ``(i_0..i_{k-1})`` in C order, columns by the bond."""
    T = np.ones((1,))
    for c in cores[:k]:
        T = np.tensordot(T, c, axes=([T.ndim - 1], [0]))
    return T.reshape(-1, T.shape[-1])


def right_matrix(cores, k):
    """Rows indexed by the bond, columns by ``(i_k..i_{d-1})`` in C order."""
    T = np.ones((1,))
    for c in reversed(cores[k:]):
        T = np.tensordot(c, T, axes=([2], [0]))
    return T.reshape(T.shape[0], -1)


def subcone_oracle(left_cores, right_cores, y, i):
    """Doubly projected bond matrix from explicit interface matrices.

    ``left_cores`` are the left-orthonormal cores ``0..i`` and ``right_cores``
    the right-orthonormal cores ``i+1..d-1`` of the point.
    """
    shape = y.shape
    Lm = left_matrix(left_cores, i)  # (N_<i, r_{i-1})
    Rm = right_matrix(right_cores[1:], 0)  # (r_{i+1}, N_>i+1)
    Y4 = y.reshape(Lm.shape[0], shape[i], shape[i + 1], Rm.shape[1])
    M = np.einsum("pa,pnmq,bq->anmb", Lm, Y4, Rm)
    rl, ni, nj, rr = M.shape
    M = M.reshape(rl * ni, nj * rr)
    r = left_cores[i].shape[2]
    U = left_cores[i].reshape(-1, r)
    V = right_cores[0].reshape(r, -1)
    Pu = np.eye(U.shape[0]) - U @ U.T
    Pv = np.eye(V.shape[1]) - V.T @ V
    return Pu @ M @ Pv


def numerical_rank(m, rtol):
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))
