"""Tangent-space geometry of fixed-rank tensor trains.

A point ``X`` is handled through its :class:`~ttrram.tt.OrthoFrame`
(left-orthogonal cores ``U_k``, right-orthogonal cores ``V_k``). Tangent
vectors are stored as ``d`` cores ``W_k`` so that the represented tensor is

    sum_k  U_0 ... U_{k-1} . W_k . V_{k+1} ... V_{d-1}

with a gauge index ``j``: ``W_k`` is orthogonal to ``U_k`` (right unfoldings)
for ``k < j`` and to ``V_k`` (left unfoldings) for ``k > j``. Under any gauge
the ``d`` terms are mutually orthogonal.

Inputs to the projections may be dense arrays, :class:`~ttrram.samples.SampleSet`
objects (sparse tensors that are zero off the sampled set), or TT tensors.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .samples import SampleSet
from .tt import OrthoFrame, TTTensor, ortho_frame, truncated_svd, tt_round


def as_frame(x):
    return x if isinstance(x, OrthoFrame) else ortho_frame(x)


# ---------------------------------------------------------------------------
# per-sample interface products
# ---------------------------------------------------------------------------


class SampleInterfaces:
    """Left/right interface rows of a frame evaluated at sample indices.

    ``L[k]`` (shape ``(m, r_{k-1})``) is the product of ``U_0..U_{k-1}`` and
    ``R[k]`` (shape ``(m, r_k)``) the product of ``V_{k+1}..V_{d-1}`` at each
    sample. These are shared by gradient accumulation, evaluation of tangent
    vectors and evaluation of the point itself.
    """

    def __init__(self, frame, indices):
        self.frame = frame
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        d = frame.ndim
        m = self.indices.shape[0]
        L = [np.ones((m, 1))]
        for k in range(d - 1):
            L.append(kernels.left_step(L[-1], frame.left[k], self.indices[:, k]))
        R = [None] * d
        R[d - 1] = np.ones((m, 1))
        for k in range(d - 2, -1, -1):
            R[k] = kernels.right_step(frame.right[k + 1], self.indices[:, k + 1], R[k + 1])
        self.L = L
        self.R = R

    def core_values(self, core, k):
        """Values of ``U_{<k} . core . V_{>k}`` at the samples."""
        return kernels.core_values(self.L[k], core, self.R[k], self.indices[:, k])

    def point_values(self):
        d = self.frame.ndim
        return self.core_values(self.frame.middle[d - 1], d - 1)

    def tangent_values(self, xi):
        out = np.zeros(self.indices.shape[0])
        for k, w in enumerate(xi.W):
            out += self.core_values(w, k)
        return out

    def pair_values(self, a, b, i):
        """Values of ``U_{<i} . a . b . V_{>i+1}`` at the samples."""
        tmp = kernels.left_step(self.L[i], a, self.indices[:, i])
        return kernels.core_values(tmp, b, self.R[i + 1], self.indices[:, i + 1])

    def accumulate(self, y, k):
        n = self.frame.shape[k]
        return kernels.accumulate_core(self.L[k], self.R[k], y, self.indices[:, k], n)

    def accumulate_pair(self, y, i):
        fr = self.frame
        return kernels.accumulate_pair(
            self.L[i], self.R[i + 1], y,
            self.indices[:, i], self.indices[:, i + 1],
            fr.shape[i], fr.shape[i + 1],
        )


# ---------------------------------------------------------------------------
# sandwiches U_{<k}^T Y V_{>k}^T
# ---------------------------------------------------------------------------


def _dense_left(frame, k):
    """Right unfolding of ``U_0 ... U_{k-1}``: ``(n_0..n_{k-1}, r_{k-1})``."""
    M = np.ones((1, 1))
    for j in range(k):
        M = np.einsum("pa,anb->pnb", M, frame.left[j]).reshape(-1, frame.left[j].shape[2])
    return M


def _dense_right(frame, k):
    """Left unfolding of ``V_{k+1} ... V_{d-1}``: ``(r_k, n_{k+1}..n_{d-1})``."""
    d = frame.ndim
    M = np.ones((1, 1))
    for j in range(d - 1, k, -1):
        c = frame.right[j]
        M = np.einsum("anb,bq->anq", c, M).reshape(c.shape[0], -1)
    return M


def _tt_left(frame, y, k):
    M = np.ones((1, 1))
    for j in range(k):
        M = np.einsum("ab,anc,bnd->cd", M, frame.left[j], y.cores[j], optimize=True)
    return M


def _tt_right(frame, y, k):
    d = frame.ndim
    M = np.ones((1, 1))
    for j in range(d - 1, k, -1):
        M = np.einsum("anc,bnd,dc->ba", frame.right[j], y.cores[j], M, optimize=True)
    return M


def _check_input(frame, y):
    shape = y.shape
    if tuple(shape) != frame.shape:
        raise ValueError(f"shape mismatch: {tuple(shape)} vs {frame.shape}")


def sandwich_cores(frame, y, cache=None):
    """All cores ``Z_k = U_{<k}^T . Y . V_{>k}^T`` of shape ``(r_{k-1}, n_k, r_k)``."""
    _check_input(frame, y)
    d = frame.ndim
    if isinstance(y, SampleSet):
        if cache is None:
            cache = SampleInterfaces(frame, y.indices)
        return [cache.accumulate(y.values, k) for k in range(d)]
    if isinstance(y, TTTensor):
        lefts = [np.ones((1, 1))]
        for j in range(d - 1):
            lefts.append(
                np.einsum("ab,anc,bnd->cd", lefts[-1], frame.left[j], y.cores[j], optimize=True)
            )
        rights = [None] * d
        rights[d - 1] = np.ones((1, 1))
        for j in range(d - 2, -1, -1):
            rights[j] = np.einsum(
                "anc,bnd,dc->ba", frame.right[j + 1], y.cores[j + 1], rights[j + 1], optimize=True
            )
        return [
            np.einsum("ac,cne,eb->anb", lefts[k], y.cores[k], rights[k], optimize=True)
            for k in range(d)
        ]
    y = np.asarray(y, dtype=np.float64)
    out = []
    for k in range(d):
        UL = _dense_left(frame, k)
        VR = _dense_right(frame, k)
        Y3 = y.reshape(UL.shape[0], frame.shape[k], VR.shape[1])
        out.append(np.einsum("pa,pnq,bq->anb", UL, Y3, VR, optimize=True))
    return out


def sandwich_pair(frame, y, i, cache=None):
    """``U_{<i}^T . Y . V_{>i+1}^T`` as a ``(r_{i-1}, n_i, n_{i+1}, r_{i+1})`` array."""
    _check_input(frame, y)
    if isinstance(y, SampleSet):
        if cache is None:
            cache = SampleInterfaces(frame, y.indices)
        return cache.accumulate_pair(y.values, i)
    if isinstance(y, TTTensor):
        Lm = _tt_left(frame, y, i)
        Rm = _tt_right(frame, y, i + 1)
        return np.einsum(
            "ac,cne,emf,fb->anmb", Lm, y.cores[i], y.cores[i + 1], Rm, optimize=True
        )
    y = np.asarray(y, dtype=np.float64)
    UL = _dense_left(frame, i)
    VR = _dense_right(frame, i + 1)
    Y4 = y.reshape(UL.shape[0], frame.shape[i], frame.shape[i + 1], VR.shape[1])
    return np.einsum("pa,pnmq,bq->anmb", UL, Y4, VR, optimize=True)


# ---------------------------------------------------------------------------
# tangent vectors
# ---------------------------------------------------------------------------


def _perp_left(w, u):
    """Remove from ``w`` the range of ``u`` (right unfoldings)."""
    r = u.shape[2]
    W = w.reshape(-1, r)
    U = u.reshape(-1, r)
    return (W - U @ (U.T @ W)).reshape(w.shape)


def _perp_right(w, v):
    """Remove from ``w`` the row space of ``v`` (left unfoldings)."""
    r = v.shape[0]
    W = w.reshape(r, -1)
    V = v.reshape(r, -1)
    return (W - (W @ V.T) @ V).reshape(w.shape)


class TangentVector:
    """Element of the tangent space at ``frame`` in gauge ``gauge``."""

    __slots__ = ("frame", "W", "gauge")

    def __init__(self, frame, W, gauge):
        d = frame.ndim
        if len(W) != d:
            raise ValueError(f"expected {d} parameter cores, got {len(W)}")
        if not 0 <= gauge < d:
            raise ValueError(f"gauge {gauge} out of range")
        self.frame = frame
        self.W = [np.asarray(w, dtype=np.float64) for w in W]
        self.gauge = gauge

    def _compatible(self, other):
        if other.frame is not self.frame or other.gauge != self.gauge:
            raise ValueError("tangent vectors live at different points or gauges")

    def inner(self, other):
        self._compatible(other)
        return float(sum(np.vdot(a, b) for a, b in zip(self.W, other.W)))

    def norm(self):
        return float(np.sqrt(sum(np.vdot(w, w) for w in self.W)))

    def __mul__(self, alpha):
        return TangentVector(self.frame, [alpha * w for w in self.W], self.gauge)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __add__(self, other):
        self._compatible(other)
        return TangentVector(self.frame, [a + b for a, b in zip(self.W, other.W)], self.gauge)

    def __sub__(self, other):
        return self + (-other)

    def gauge_residual(self):
        """Largest violation of the gauge conditions (max abs entry)."""
        fr = self.frame
        worst = 0.0
        for k, w in enumerate(self.W):
            if k < self.gauge:
                r = fr.left[k].shape[2]
                g = fr.left[k].reshape(-1, r).T @ w.reshape(-1, r)
            elif k > self.gauge:
                r = fr.right[k].shape[0]
                g = w.reshape(r, -1) @ fr.right[k].reshape(r, -1).T
            else:
                continue
            worst = max(worst, float(np.max(np.abs(g))) if g.size else 0.0)
        return worst

    def to_tt(self):
        return tangent_to_tt(self)


def project_tangent(x, y, gauge=None, cache=None):
    """Orthogonal projection of ``y`` onto the tangent space at ``x``.

    Parameters
    ----------
    x : TTTensor or OrthoFrame
    y : ndarray, SampleSet or TTTensor
        Same shape as ``x``. A ``SampleSet`` stands for the sparse tensor
        with those entries and zeros elsewhere.
    gauge : int, optional
        Position ``j`` of the unconstrained parameter core (default ``d - 1``).
    cache : SampleInterfaces, optional
        Reused interface rows when ``y`` is a ``SampleSet`` on the same indices.
    """
    frame = as_frame(x)
    d = frame.ndim
    j = d - 1 if gauge is None else gauge
    if not 0 <= j < d:
        raise ValueError(f"gauge {j} out of range for order {d}")
    Z = sandwich_cores(frame, y, cache=cache)
    W = []
    for k, z in enumerate(Z):
        if k < j:
            W.append(_perp_left(z, frame.left[k]))
        elif k > j:
            W.append(_perp_right(z, frame.right[k]))
        else:
            W.append(z)
    return TangentVector(frame, W, j)


def change_gauge(xi, j):
    """Same tangent tensor with the unconstrained core moved to position ``j``."""
    fr = xi.frame
    W = [w.copy() for w in xi.W]
    g = xi.gauge
    while g < j:
        r = fr.left[g].shape[2]
        U = fr.left[g].reshape(-1, r)
        C = U.T @ W[g].reshape(-1, r)
        W[g] = (W[g].reshape(-1, r) - U @ C).reshape(W[g].shape)
        nxt = W[g + 1]
        V = fr.right[g + 1]
        W[g + 1] = nxt + (C @ V.reshape(r, -1)).reshape(V.shape)
        g += 1
    while g > j:
        r = fr.right[g].shape[0]
        V = fr.right[g].reshape(r, -1)
        C = W[g].reshape(r, -1) @ V.T
        W[g] = (W[g].reshape(r, -1) - C @ V).reshape(W[g].shape)
        U = fr.left[g - 1]
        W[g - 1] = W[g - 1] + (U.reshape(-1, r) @ C).reshape(U.shape)
        g -= 1
    return TangentVector(fr, W, j)


def _block_train(frame, W, last_extra=None):
    """Rank-``2r`` train of ``sum_k U_{<k} W_k V_{>k}`` (+ ``U_{<d-1} last_extra``)."""
    d = frame.ndim
    cores = []
    for k in range(d):
        w = W[k]
        if k == 0:
            cores.append(np.concatenate([w, frame.left[0]], axis=2))
        elif k == d - 1:
            bottom = w if last_extra is None else w + last_extra
            cores.append(np.concatenate([frame.right[k], bottom], axis=0))
        else:
            v, u = frame.right[k], frame.left[k]
            c = np.zeros((v.shape[0] + u.shape[0], w.shape[1], v.shape[2] + u.shape[2]))
            c[: v.shape[0], :, : v.shape[2]] = v
            c[v.shape[0] :, :, : v.shape[2]] = w
            c[v.shape[0] :, :, v.shape[2] :] = u
            cores.append(c)
    return TTTensor(cores)


def tangent_to_tt(xi):
    """TT (ranks at most ``2r``) representing the tangent vector."""
    return _block_train(xi.frame, xi.W)


def retract_fixed_rank(x, t, xi):
    """``round(X + t xi)`` back to the ranks of ``X``.

    ``x`` may be ``None``, in which case the base point of ``xi`` is used.
    """
    fr = xi.frame
    if x is not None and (as_frame(x).shape != fr.shape or as_frame(x).ranks != fr.ranks):
        raise ValueError("tangent vector is based at a different point")
    d = fr.ndim
    T = _block_train(fr, [t * w for w in xi.W], last_extra=fr.middle[d - 1])
    return tt_round(T, fr.ranks)


# ---------------------------------------------------------------------------
# subcone directions and rank-increasing retraction
# ---------------------------------------------------------------------------


def subcone_matrix(x, y, i, cache=None):
    """Doubly projected middle matrix for bond ``i`` (cores ``i`` and ``i + 1``).

    Shape ``(r_{i-1} n_i, n_{i+1} r_{i+1})``. The rows are projected onto the
    orthogonal complement of the range of ``U_i`` and the columns onto the
    complement of the row space of ``V_{i+1}``.
    """
    frame = as_frame(x)
    d = frame.ndim
    if not 0 <= i < d - 1:
        raise ValueError(f"bond {i} out of range for order {d}")
    M4 = sandwich_pair(frame, y, i, cache=cache)
    rl, ni, nj, rr = M4.shape
    M = M4.reshape(rl * ni, nj * rr)
    r = frame.ranks[i]
    U = frame.left[i].reshape(-1, r)
    V = frame.right[i + 1].reshape(r, -1)
    M = M - U @ (U.T @ M)
    M = M - (M @ V.T) @ V
    return M


@dataclass(frozen=True)
class ConeDirection:
    """Subcone direction ``U_{<i} . U . V . V_{>i+1}`` at bond ``mode``.

    ``U`` has shape ``(r_{i-1}, n_i, s)`` with orthonormal columns in its right
    unfolding, ``V`` has shape ``(s, n_{i+1}, r_{i+1})`` and carries the
    singular values. ``spectrum`` is the full singular spectrum of the
    projected matrix it came from.
    """

    mode: int
    U: np.ndarray
    V: np.ndarray
    frame: OrthoFrame
    clamped: bool = False
    spectrum: np.ndarray = None

    @property
    def s(self):
        return self.U.shape[2]

    def to_tt(self):
        fr = self.frame
        i = self.mode
        cores = list(fr.left[:i]) + [self.U, self.V] + list(fr.right[i + 2 :])
        return TTTensor(cores)

    def norm(self):
        return float(np.linalg.norm(self.V))

    def orthogonality_residual(self):
        fr = self.frame
        i = self.mode
        r = fr.ranks[i]
        a = fr.left[i].reshape(-1, r).T @ self.U.reshape(-1, self.s)
        b = self.V.reshape(self.s, -1) @ fr.right[i + 1].reshape(r, -1).T
        return max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))


def cone_from_matrix(frame, P, i, s):
    """Best rank-``s`` subcone direction from an already computed matrix ``P``."""
    svd = truncated_svd(P, s)
    rl, ni = frame.middle[i].shape[:2]
    nj, rr = frame.middle[i + 1].shape[1:]
    k = svd.U.shape[1]
    U = svd.U.reshape(rl, ni, k)
    V = (svd.S[:, None] * svd.V.T).reshape(k, nj, rr)
    return ConeDirection(i, U, V, frame, clamped=svd.clamped, spectrum=svd.spectrum)


def project_subcone(x, y, i, s, cache=None):
    """Projection of ``y`` onto the rank-``s`` normal subcone at bond ``i``."""
    if s < 1:
        raise ValueError("rank increment must be at least 1")
    frame = as_frame(x)
    P = subcone_matrix(frame, y, i, cache=cache)
    return cone_from_matrix(frame, P, i, s)


def retract_increase(x, t, direction):
    """Point ``X + t * direction`` with bond ``mode`` widened by ``direction.s``.

    The new train is ``(mode + 1)``-orthogonal. ``x`` must be the point the
    direction was built at (checked through shapes).
    """
    frame = direction.frame if x is None else as_frame(x)
    i = direction.mode
    if (
        frame.shape != direction.frame.shape
        or frame.ranks != direction.frame.ranks
    ):
        raise ValueError("direction was built at a different point")
    d = frame.ndim
    left_i = np.concatenate([frame.left[i], direction.U], axis=2)
    mid = np.concatenate([frame.middle[i + 1], t * direction.V], axis=0)
    cores = list(frame.left[:i]) + [left_i, mid] + list(frame.right[i + 2 : d])
    return TTTensor(cores, ortho=i + 1)
