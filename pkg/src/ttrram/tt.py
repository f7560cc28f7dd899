"""Dense and tensor-train tensors.

Conventions
-----------
* A dense tensor is a plain ``numpy.ndarray`` of shape ``(n_1, ..., n_d)``,
  ``d >= 2``. Its linearization (file format, :func:`unfold`) is column-major
  with the first index fastest, so ``unfold`` is a pure reshape.
* A TT core ``k`` (0-based) has shape ``(r_{k-1}, n_k, r_k)`` with
  ``r_{-1} = r_{d-1} = 1``. Core unfoldings are C-order reshapes:
  the *left* unfolding is ``(r_{k-1}, n_k r_k)`` and the *right* unfolding is
  ``(r_{k-1} n_k, r_k)``.
* Core positions are 0-based. The rank vector ``ranks[k]`` is the bond
  between cores ``k`` and ``k + 1`` and equals the rank of ``unfold(a, k + 1)``.
* A TT is ``k``-orthogonal when cores ``j < k`` have orthonormal columns in
  their right unfolding and cores ``j > k`` have orthonormal rows in their
  left unfolding.
"""

from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels

DENSE_CAP = 10**7

_EPS = np.finfo(float).eps


class DenseBudgetError(MemoryError):
    """Raised when a dense tensor would exceed the configured entry budget."""


# ---------------------------------------------------------------------------
# dense helpers
# ---------------------------------------------------------------------------


def unfold(a, k):
    """Matrix of shape ``(n_1...n_k, n_{k+1}...n_d)``; ``1 <= k <= d - 1``."""
    a = np.asarray(a)
    if not 1 <= k <= a.ndim - 1:
        raise ValueError(f"unfolding index {k} out of range for order {a.ndim}")
    rows = int(np.prod(a.shape[:k]))
    return a.reshape(rows, -1, order="F")


def unfold3(a, i, j):
    """Order-3 reshape ``(n_1..n_i, n_{i+1}..n_j, n_{j+1}..n_d)``; ``1 <= i <= j <= d``."""
    a = np.asarray(a)
    d = a.ndim
    if not 1 <= i <= j <= d:
        raise ValueError(f"need 1 <= i <= j <= {d}, got i={i}, j={j}")
    n = a.shape
    dims = (int(np.prod(n[:i])), int(np.prod(n[i:j])), int(np.prod(n[j:])))
    return a.reshape(dims, order="F")


def fold(m, shape):
    """Inverse of :func:`unfold` and :func:`unfold3`."""
    return np.asarray(m).reshape(tuple(shape), order="F")


# ---------------------------------------------------------------------------
# TT tensor
# ---------------------------------------------------------------------------


def _frozen(a):
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    a.setflags(write=False)
    return a


class TTTensor:
    """Tensor train given by its cores.

    Parameters
    ----------
    cores : sequence of ndarray
        ``d >= 2`` order-3 cores, core ``k`` of shape ``(r_{k-1}, n_k, r_k)``.
    ortho : int or None
        Position ``k`` if the train is known to be ``k``-orthogonal. The marker
        is trusted, not verified; :func:`is_orthogonal` checks it.

    Instances are immutable: the cores are copied and made read-only.
    """

    __slots__ = ("cores", "ortho")

    def __init__(self, cores, ortho=None):
        cores = tuple(_frozen(c) for c in cores)
        if len(cores) < 2:
            raise ValueError("a tensor train needs at least two cores")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} has {c.ndim} dimensions, expected 3")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{cores[k].shape[2]} != {cores[k + 1].shape[0]}"
                )
        if ortho is not None and not 0 <= ortho < len(cores):
            raise ValueError(f"orthogonality position {ortho} out of range")
        object.__setattr__(self, "cores", cores)
        object.__setattr__(self, "ortho", ortho)

    def __setattr__(self, name, value):
        raise AttributeError("TTTensor is immutable")

    @property
    def ndim(self):
        return len(self.cores)

    @property
    def shape(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self):
        return tuple(c.shape[2] for c in self.cores[:-1])

    def full(self, cap=DENSE_CAP):
        return reconstruct(self, cap=cap)

    def norm(self):
        if self.ortho is not None:
            return float(np.linalg.norm(self.cores[self.ortho]))
        return float(np.sqrt(max(inner(self, self), 0.0)))

    def scale(self, alpha):
        pos = 0 if self.ortho is None else self.ortho
        cores = list(self.cores)
        cores[pos] = alpha * cores[pos]
        return TTTensor(cores, ortho=self.ortho)

    def __repr__(self):
        return f"TTTensor(shape={self.shape}, ranks={self.ranks}, ortho={self.ortho})"


def zeros(shape):
    """Zero tensor with all ranks 1 and zero cores."""
    return TTTensor([np.zeros((1, n, 1)) for n in shape])


def random_tt(shape, ranks, rng=None):
    """Product of standard-normal cores.

    Entries of the result have standard deviation close to ``sqrt(prod(ranks))``.
    """
    rng = np.random.default_rng(rng)
    shape = tuple(int(n) for n in shape)
    ranks = tuple(int(r) for r in ranks)
    check_ranks(shape, ranks)
    full_r = (1,) + ranks + (1,)
    cores = [
        rng.standard_normal((full_r[k], shape[k], full_r[k + 1]))
        for k in range(len(shape))
    ]
    return TTTensor(cores)


def max_ranks(shape):
    """Largest admissible TT-ranks for ``shape``."""
    d = len(shape)
    return tuple(
        int(min(np.prod(shape[: k + 1]), np.prod(shape[k + 1 :]))) for k in range(d - 1)
    )


def check_ranks(shape, ranks):
    if len(ranks) != len(shape) - 1:
        raise ValueError(f"expected {len(shape) - 1} ranks, got {len(ranks)}")
    bound = max_ranks(shape)
    for k, (r, b) in enumerate(zip(ranks, bound)):
        if not 1 <= r <= b:
            raise ValueError(f"rank {r} at bond {k} outside [1, {b}]")


def contract(a, b):
    """Contract the last mode of ``a`` with the first mode of ``b``.

    Both inputs are order-3; the two middle modes are merged (C order) so the
    result is again order-3.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 3 or b.ndim != 3:
        raise ValueError("contract expects order-3 arrays")
    if a.shape[2] != b.shape[0]:
        raise ValueError(f"cannot contract bond {a.shape[2]} with {b.shape[0]}")
    m = a.reshape(-1, a.shape[2]) @ b.reshape(b.shape[0], -1)
    return m.reshape(a.shape[0], a.shape[1] * b.shape[1], b.shape[2])


def reconstruct(x, cap=DENSE_CAP):
    """Dense tensor represented by ``x``."""
    size = int(np.prod(x.shape))
    if cap is not None and size > cap:
        raise DenseBudgetError(f"{size} entries exceed the dense budget of {cap}")
    out = x.cores[0]
    for core in x.cores[1:]:
        out = contract(out, core)
    return out.reshape(x.shape)


def _numerical_rank(s, shape):
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * max(shape) * _EPS))


def tt_svd(a, rank_caps="full", tol=None):
    """TT decomposition by successive truncated SVDs of the unfoldings.

    Parameters
    ----------
    a : ndarray
        Dense tensor of order ``d >= 2``.
    rank_caps : sequence of int or ``"full"``
        Upper bounds on the TT-ranks.
    tol : float, optional
        Relative tolerance. At each step the smallest rank whose discarded
        tail is at most ``tol`` times the Frobenius norm of the current
        unfolding is kept, then capped by ``rank_caps``.

    Returns
    -------
    TTTensor
        Left-orthogonal cores ``0..d-2`` (``ortho = d - 1``). Numerically zero
        singular values are always dropped, so an exactly low-rank input gets
        its exact ranks. The zero tensor yields ranks all 1 and zero cores.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim < 2:
        raise ValueError("need a tensor of order at least 2")
    shape = a.shape
    d = a.ndim
    caps = None if isinstance(rank_caps, str) else tuple(int(r) for r in rank_caps)
    if isinstance(rank_caps, str) and rank_caps != "full":
        raise ValueError(f"unknown rank cap {rank_caps!r}")
    if caps is not None and (len(caps) != d - 1 or min(caps) < 1):
        raise ValueError("rank caps must be d-1 positive integers")
    if not np.any(a):
        return zeros(shape)

    cores = []
    r_prev = 1
    C = a.reshape(1, -1)
    for k in range(d - 1):
        C = C.reshape(r_prev * shape[k], -1)
        U, S, Vt = np.linalg.svd(C, full_matrices=False)
        r = max(_numerical_rank(S, C.shape), 1)
        if tol is not None:
            tails = np.sqrt(np.cumsum((S**2)[::-1])[::-1])  # tails[j] = ||S[j:]||
            ok = np.nonzero(np.append(tails, 0.0) <= tol * np.linalg.norm(S))[0]
            r = min(r, max(int(ok[0]), 1))
        if caps is not None:
            r = min(r, caps[k])
        cores.append(U[:, :r].reshape(r_prev, shape[k], r))
        C = S[:r, None] * Vt[:r]
        r_prev = r
    cores.append(C.reshape(r_prev, shape[-1], 1))
    return TTTensor(cores, ortho=d - 1)


# ---------------------------------------------------------------------------
# orthogonalization
# ---------------------------------------------------------------------------


def _qr_pos(m):
    """Reduced QR with non-negative diagonal in R."""
    q, r = np.linalg.qr(m)
    sgn = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * sgn, r * sgn[:, None]


def _left_sweep(cores, stop):
    """Left-orthogonalize cores ``0..stop-1``; returns new list (ranks may shrink)."""
    cores = list(cores)
    for k in range(stop):
        c = cores[k]
        q, r = _qr_pos(c.reshape(-1, c.shape[2]))
        cores[k] = q.reshape(c.shape[0], c.shape[1], q.shape[1])
        nxt = cores[k + 1]
        cores[k + 1] = (r @ nxt.reshape(nxt.shape[0], -1)).reshape(
            r.shape[0], nxt.shape[1], nxt.shape[2]
        )
    return cores


def _right_sweep(cores, stop):
    """Right-orthogonalize cores ``d-1..stop+1``."""
    cores = list(cores)
    for k in range(len(cores) - 1, stop, -1):
        c = cores[k]
        q, r = _qr_pos(c.reshape(c.shape[0], -1).T)
        cores[k] = q.T.reshape(q.shape[1], c.shape[1], c.shape[2])
        prv = cores[k - 1]
        cores[k - 1] = (prv.reshape(-1, prv.shape[2]) @ r.T).reshape(
            prv.shape[0], prv.shape[1], r.shape[0]
        )
    return cores


class OrthoFactors(NamedTuple):
    """Gauge matrices linking the orthogonal forms of one tensor.

    ``Q[k] = U_k^{R,T} S_k^R`` and ``R[k] = S_k^L V_k^{L,T}``, where ``S_k`` is
    the core of the ``k``-orthogonal form. ``Q[k]`` equals ``R[k + 1]``.
    ``Q[d-1]`` and ``R[0]`` are ``None``.
    """

    Q: list
    R: list


class OrthoFrame:
    """Left- and right-orthonormal cores of one tensor, plus all gauge cores.

    Attributes
    ----------
    left : list
        ``left[k]`` for ``k < d - 1``: left-orthogonal core (orthonormal
        columns of the right unfolding). ``left[d-1]`` is ``None``.
    right : list
        ``right[k]`` for ``k > 0``: right-orthogonal core (orthonormal rows of
        the left unfolding). ``right[0]`` is ``None``.
    middle : list
        ``middle[k]`` is the core at position ``k`` of the ``k``-orthogonal
        form ``left[:k] + [middle[k]] + right[k+1:]``.
    """

    __slots__ = ("left", "right", "middle", "shape", "ranks")

    def __init__(self, left, right, middle):
        self.left = left
        self.right = right
        self.middle = middle
        self.shape = tuple(c.shape[1] for c in middle)
        self.ranks = tuple(c.shape[2] for c in middle[:-1])

    @property
    def ndim(self):
        return len(self.middle)

    def at(self, k):
        """The ``k``-orthogonal tensor train."""
        d = self.ndim
        cores = list(self.left[:k]) + [self.middle[k]] + list(self.right[k + 1 : d])
        return TTTensor(cores, ortho=k)

    def factors(self):
        d = self.ndim
        Q = [None] * d
        R = [None] * d
        for k in range(d - 1):
            Q[k] = self.left[k].reshape(-1, self.ranks[k]).T @ self.middle[k].reshape(
                -1, self.ranks[k]
            )
        for k in range(1, d):
            r = self.ranks[k - 1]
            R[k] = self.middle[k].reshape(r, -1) @ self.right[k].reshape(r, -1).T
        return OrthoFactors(Q, R)


def ortho_frame(x):
    """Compute the :class:`OrthoFrame` of ``x``.

    Ranks that exceed what the unfoldings allow are reduced along the way;
    all returned cores share the same (possibly reduced) rank vector.
    """
    fits = all(c.shape[0] * c.shape[1] >= c.shape[2] and c.shape[1] * c.shape[2] >= c.shape[0]
               for c in x.cores)
    if fits and x.ortho is not None and is_orthogonal(x, x.ortho):
        # keep the gauge of an input that is already orthogonal
        return _frame_at(list(x.cores), x.ortho)
    cores = list(x.cores)
    d = len(cores)
    while True:
        left = _left_sweep(cores, d - 1)
        both = _right_sweep(left, 0)
        if tuple(c.shape[2] for c in both[:-1]) == tuple(c.shape[2] for c in left[:-1]):
            break
        cores = both
    return _frame_at(both, 0)


def _frame_at(cores, pos):
    """Frame of a ``pos``-orthogonal train whose ``at(pos)`` is ``cores``."""
    d = len(cores)
    left = list(cores[:pos]) + [None] * (d - pos)
    right = [None] * (pos + 1) + list(cores[pos + 1 :])
    middle = [None] * d
    middle[pos] = cores[pos]
    cur = cores[pos]
    for k in range(pos, d - 1):
        q, r = _qr_pos(cur.reshape(-1, cur.shape[2]))
        left[k] = q.reshape(cur.shape[0], cur.shape[1], q.shape[1])
        nxt = cores[k + 1]
        cur = (r @ nxt.reshape(nxt.shape[0], -1)).reshape(r.shape[0], nxt.shape[1], nxt.shape[2])
        middle[k + 1] = cur
    cur = cores[pos]
    for k in range(pos, 0, -1):
        q, r = _qr_pos(cur.reshape(cur.shape[0], -1).T)
        right[k] = q.T.reshape(q.shape[1], cur.shape[1], cur.shape[2])
        prv = cores[k - 1]
        cur = (prv.reshape(-1, prv.shape[2]) @ r.T).reshape(prv.shape[0], prv.shape[1], r.shape[0])
        middle[k - 1] = cur
    return OrthoFrame(left, right, middle)


def orthogonalize(x, pos):
    """Return ``(y, factors)`` with ``y`` the ``pos``-orthogonal form of ``x``.

    Unpivoted QR sweeps are used (left-to-right for cores before ``pos``,
    right-to-left after it); the diagonal of every ``R`` factor is made
    non-negative, which fixes the signs of the orthonormal cores.
    """
    d = x.ndim
    if not 0 <= pos < d:
        raise ValueError(f"position {pos} out of range for order {d}")
    fr = ortho_frame(x)
    return fr.at(pos), fr.factors()


def is_orthogonal(x, pos=None, tol=1e-12):
    """Check the ``pos``-orthogonality conditions (defaults to ``x.ortho``)."""
    pos = x.ortho if pos is None else pos
    if pos is None:
        return False
    for k, c in enumerate(x.cores):
        if k < pos:
            m = c.reshape(-1, c.shape[2])
            g = m.T @ m
        elif k > pos:
            m = c.reshape(c.shape[0], -1)
            g = m @ m.T
        else:
            continue
        if not np.allclose(g, np.eye(g.shape[0]), atol=tol, rtol=0):
            return False
    return True


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------


def _check_same_shape(x, y):
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")


def inner(x, y):
    """Euclidean inner product of two trains, by sequential contraction."""
    _check_same_shape(x, y)
    M = np.ones((1, 1))
    for a, b in zip(x.cores, y.cores):
        M = np.einsum("ab,anc,bnd->cd", M, a, b, optimize=True)
    return float(M[0, 0])


def norm(x):
    return x.norm()


def tt_axpy(x, t, y):
    """``x + t * y`` by block stacking; ranks add."""
    _check_same_shape(x, y)
    d = x.ndim
    cores = []
    for k, (a, b) in enumerate(zip(x.cores, y.cores)):
        if k == 0:
            b = t * b
        if k == 0:
            c = np.concatenate([a, b], axis=2)
        elif k == d - 1:
            c = np.concatenate([a, b], axis=0)
        else:
            c = np.zeros((a.shape[0] + b.shape[0], a.shape[1], a.shape[2] + b.shape[2]))
            c[: a.shape[0], :, : a.shape[2]] = a
            c[a.shape[0] :, :, a.shape[2] :] = b
        cores.append(c)
    return TTTensor(cores)


def gather(x, idx):
    """Entries of ``x`` at the 0-based multi-indices ``idx`` (shape ``(m, d)``)."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        return np.zeros(0)
    idx = idx.reshape(-1, x.ndim)
    if np.any(idx < 0) or np.any(idx >= np.asarray(x.shape)):
        raise IndexError("multi-index out of bounds")
    return kernels.gather(x.cores, idx)


# ---------------------------------------------------------------------------
# truncated SVD
# ---------------------------------------------------------------------------


class TruncatedSVD(NamedTuple):
    """Rank-``s`` factors ``U @ diag(S) @ V.T``.

    ``clamped`` is true when the requested rank exceeded ``min(m.shape)``.
    ``spectrum`` holds all singular values of the input.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    clamped: bool
    spectrum: np.ndarray


def truncated_svd(m, s):
    """Best rank-``s`` approximation factors of a matrix.

    Signs are fixed so that the largest-magnitude entry of each left singular
    vector is positive.
    """
    m = np.asarray(m, dtype=np.float64)
    if s < 1:
        raise ValueError("target rank must be at least 1")
    kmax = min(m.shape)
    clamped = s > kmax
    s = min(s, kmax)
    U, S, Vt = np.linalg.svd(m, full_matrices=False)
    U, Vt = U[:, :s], Vt[:s]
    if U.size:
        piv = np.argmax(np.abs(U), axis=0)
        sgn = np.where(U[piv, np.arange(s)] < 0, -1.0, 1.0)
        U = U * sgn
        Vt = Vt * sgn[:, None]
    return TruncatedSVD(U, S[:s].copy(), Vt.T, clamped, S)


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------


def tt_round(a, target):
    """Reduce TT-ranks to at most ``target`` with one left-to-right SVD sweep.

    ``a`` is first brought to 0-orthogonal form. At each bond the right
    unfolding of the current core is replaced by its best rank-``target[k]``
    approximation, the singular values and right factors being pushed into
    the next core. Targets above the current rank leave that bond unchanged.
    The result is ``(d-1)``-orthogonal and satisfies ``<round(a), a> =
    ||round(a)||^2``.
    """
    d = a.ndim
    target = tuple(int(r) for r in target)
    if len(target) != d - 1:
        raise ValueError(f"expected {d - 1} target ranks, got {len(target)}")
    if min(target) < 1:
        raise ValueError("target ranks must be positive")
    cores = _right_sweep(a.cores, 0)
    for k in range(d - 1):
        c = cores[k]
        m = c.reshape(-1, c.shape[2])
        svd = truncated_svd(m, target[k])
        r = svd.U.shape[1]
        cores[k] = svd.U.reshape(c.shape[0], c.shape[1], r)
        nxt = cores[k + 1]
        carry = svd.S[:, None] * svd.V.T
        cores[k + 1] = (carry @ nxt.reshape(nxt.shape[0], -1)).reshape(
            r, nxt.shape[1], nxt.shape[2]
        )
    return TTTensor(cores, ortho=d - 1)
