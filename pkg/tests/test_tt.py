import numpy as np
import pytest
from conftest import rel
from _oracles import numerical_rank, random_cores, tt_dense, tt_entry

from ttrram.tt import (
    DenseBudgetError,
    TTTensor,
    contract,
    fold,
    gather,
    inner,
    is_orthogonal,
    norm,
    ortho_frame,
    orthogonalize,
    random_tt,
    reconstruct,
    truncated_svd,
    tt_axpy,
    tt_svd,
    unfold,
    unfold3,
    zeros,
)


# ---------------------------------------------------------------------------
# unfoldings
# ---------------------------------------------------------------------------


def test_unfold_column_major_example():
    a = np.arange(1, 9, dtype=float).reshape((2, 2, 2), order="F")
    np.testing.assert_array_equal(unfold(a, 1), [[1, 3, 5, 7], [2, 4, 6, 8]])


def test_unfold_shape_and_roundtrip(rng):
    a = rng.standard_normal((3, 4, 5))
    m = unfold(a, 2)
    assert m.shape == (12, 5)
    np.testing.assert_array_equal(fold(m, a.shape), a)


@pytest.mark.parametrize("k", [0, 3])
def test_unfold_out_of_range(k):
    with pytest.raises(ValueError):
        unfold(np.zeros((2, 2, 2)), k)


def test_unfold3_shapes_and_degenerate(rng):
    a = rng.standard_normal((2, 3, 4, 5))
    assert unfold3(a, 1, 3).shape == (2, 12, 5)
    for i in (1, 2, 3):
        np.testing.assert_array_equal(unfold3(a, i, i)[:, 0, :], unfold(a, i))
    np.testing.assert_array_equal(unfold3(a, 2, 4)[:, :, 0], unfold(a, 2))
    np.testing.assert_array_equal(fold(unfold3(a, 1, 3), a.shape), a)
    with pytest.raises(ValueError):
        unfold3(a, 3, 2)


def test_unfold_rank_equals_tt_rank(rng):
    x = random_tt((5, 6, 5, 4), (2, 3, 2), rng)
    a = x.full()
    assert [numerical_rank(unfold(a, k), 1e-8) for k in (1, 2, 3)] == [2, 3, 2]


# ---------------------------------------------------------------------------
# contraction and reconstruction
# ---------------------------------------------------------------------------


def test_contract_identity_and_associativity(rng):
    core = rng.standard_normal((2, 3, 4))
    ident = np.eye(4).reshape(4, 1, 4)
    np.testing.assert_allclose(contract(core, ident), core, atol=0)
    a = rng.standard_normal((1, 3, 2))
    b = rng.standard_normal((2, 4, 3))
    c = rng.standard_normal((3, 2, 1))
    left = contract(contract(a, b), c)
    right = contract(a, contract(b, c))
    assert rel(left, right) < 1e-12
    with pytest.raises(ValueError):
        contract(a, c)


def test_reconstruct_matches_element_formula(rng):
    cores = random_cores(rng, (3, 4, 2, 3), (2, 3, 2))
    x = TTTensor(cores)
    assert rel(reconstruct(x), tt_dense(cores)) < 1e-13


def test_reconstruct_ones_and_outer_product(rng):
    x = TTTensor([np.ones((1, 2, 1))] * 3)
    np.testing.assert_array_equal(reconstruct(x), np.ones((2, 2, 2)))
    u, v, w = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(5)
    x = TTTensor([u.reshape(1, 3, 1), v.reshape(1, 4, 1), w.reshape(1, 5, 1)])
    assert rel(x.full(), np.einsum("i,j,k->ijk", u, v, w)) < 1e-14


def test_dense_budget():
    x = TTTensor([np.ones((1, 100, 1))] * 3)
    with pytest.raises(DenseBudgetError):
        reconstruct(x, cap=10**5)


def test_core_chain_validation():
    with pytest.raises(ValueError):
        TTTensor([np.ones((1, 2, 2)), np.ones((3, 2, 1))])


# ---------------------------------------------------------------------------
# TT-SVD
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("shape", [(4, 5, 6), (3, 4, 3, 5), (6, 5, 4, 3, 2), (10, 10, 10, 10, 10)])
def test_tt_svd_full_roundtrip(rng, shape):
    a = rng.standard_normal(shape)
    x = tt_svd(a)
    assert rel(x.full(cap=None), a) < 1e-10
    assert is_orthogonal(x, len(shape) - 1)


def test_tt_svd_zero_tensor():
    x = tt_svd(np.zeros((3, 4, 5)))
    assert x.ranks == (1, 1)
    assert all(not np.any(c) for c in x.cores)


def test_tt_svd_recovers_generator_ranks(rng):
    a = random_tt((6, 7, 6, 5), (3, 3, 3), rng).full()
    assert tt_svd(a).ranks == (3, 3, 3)


def _sweep_tails(a, caps):
    """Discarded squared singular values of an independent TT-SVD sweep."""
    tails = []
    C = a.reshape(1, -1)
    r = 1
    for k, cap in enumerate(caps):
        C = C.reshape(r * a.shape[k], -1)
        U, S, Vt = np.linalg.svd(C, full_matrices=False)
        tails.append(float(np.sum(S[cap:] ** 2)))
        r = min(cap, S.size)
        C = S[:r, None] * Vt[:r]
    return tails


def test_tt_svd_truncation_error_oracle(rng):
    a = rng.standard_normal((4, 4, 4))
    x = tt_svd(a, (2, 2))
    assert x.ranks == (2, 2)
    err = np.linalg.norm(x.full() - a)
    assert err == pytest.approx(np.sqrt(sum(_sweep_tails(a, (2, 2)))), rel=1e-10)
    # classical quasi-optimality bound from the unfoldings of ``a``
    bound = sum(np.sum(np.linalg.svd(unfold(a, k), compute_uv=False)[2:] ** 2) for k in (1, 2))
    assert err <= np.sqrt(bound) * (1 + 1e-12)


def test_tt_svd_tolerance(rng):
    x = random_tt((5, 5, 5), (2, 2), rng)
    a = x.full() + 1e-9 * rng.standard_normal((5, 5, 5))
    y = tt_svd(a, tol=1e-6)
    assert y.ranks == (2, 2)
    assert rel(y.full(), a) < 1e-6


# ---------------------------------------------------------------------------
# orthogonalization
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("pos", [0, 1, 2, 3])
def test_orthogonalize_invariance_and_conditions(rng, pos):
    x = random_tt((4, 5, 3, 4), (2, 3, 2), rng)
    y, _ = orthogonalize(x, pos)
    assert rel(y.full(), x.full()) < 1e-12
    assert y.ortho == pos
    assert is_orthogonal(y, pos, tol=1e-12)
    for k, c in enumerate(y.cores):
        if k < pos:
            m = c.reshape(-1, c.shape[2])
            np.testing.assert_allclose(m.T @ m, np.eye(m.shape[1]), atol=1e-12)
        elif k > pos:
            m = c.reshape(c.shape[0], -1)
            np.testing.assert_allclose(m @ m.T, np.eye(m.shape[0]), atol=1e-12)


def test_orthogonalize_idempotent(rng):
    x = random_tt((4, 5, 3, 4), (2, 3, 2), rng)
    y, _ = orthogonalize(x, 1)
    z, _ = orthogonalize(y, 1)
    for a, b in zip(y.cores, z.cores):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_ortho_factor_relations(rng):
    x = random_tt((4, 5, 3, 4), (2, 3, 2), rng)
    fr = ortho_frame(x)
    Q, R = fr.factors()
    d = fr.ndim
    for k in range(d - 1):
        np.testing.assert_allclose(Q[k], R[k + 1], atol=1e-12)
        r = fr.ranks[k]
        lhs = fr.middle[k].reshape(-1, r)
        np.testing.assert_allclose(lhs, fr.left[k].reshape(-1, r) @ Q[k], atol=1e-12)
    for k in range(1, d):
        r = fr.ranks[k - 1]
        lhs = fr.middle[k].reshape(r, -1)
        np.testing.assert_allclose(lhs, R[k] @ fr.right[k].reshape(r, -1), atol=1e-12)
    for k in range(d):
        assert rel(fr.at(k).full(), x.full()) < 1e-12


def test_ortho_frame_reduces_redundant_ranks(rng):
    # rank 5 at the first bond exceeds n_1 = 3
    cores = random_cores(rng, (3, 4, 3), (5, 2))
    x = TTTensor(cores)
    fr = ortho_frame(x)
    assert fr.ranks == (3, 2)
    assert rel(fr.at(1).full(), x.full()) < 1e-12


# ---------------------------------------------------------------------------
# algebra and evaluation
# ---------------------------------------------------------------------------


def test_inner_and_norm_match_dense(rng):
    for _ in range(5):
        x = random_tt((4, 3, 5, 2), (2, 3, 2), rng)
        y = random_tt((4, 3, 5, 2), (3, 2, 1), rng)
        assert inner(x, y) == pytest.approx(float(np.vdot(x.full(), y.full())), rel=1e-10)
        assert inner(x, x) >= 0
        assert norm(x) == pytest.approx(np.linalg.norm(x.full()), rel=1e-10)
    with pytest.raises(ValueError):
        inner(x, random_tt((4, 3, 5, 3), (1, 1, 1), rng))


def test_inner_orthogonal_leading_factors(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    rest = random_cores(rng, (4, 3), (2, 1))[0:2]
    rest[0] = rng.standard_normal((2, 4, 2))
    rest[1] = rng.standard_normal((2, 3, 1))
    x = TTTensor([Q[:, :2].reshape(1, 5, 2)] + rest)
    y = TTTensor([Q[:, 2:4].reshape(1, 5, 2)] + [c * 3 for c in rest])
    assert abs(inner(x, y)) <= 1e-12 * norm(x) * norm(y)


def test_axpy(rng):
    x = random_tt((3, 4, 5), (2, 3), rng)
    y = random_tt((3, 4, 5), (3, 2), rng)
    assert rel(tt_axpy(x, 0.0, y).full(), x.full()) < 1e-12
    assert norm(tt_axpy(x, -1.0, x)) <= 1e-10 * norm(x)
    z = tt_axpy(x, 2.5, y)
    assert rel(z.full(), x.full() + 2.5 * y.full()) < 1e-12
    assert all(rz <= rx + ry for rz, rx, ry in zip(z.ranks, x.ranks, y.ranks))


def test_gather(rng):
    x = random_tt((2, 2, 2), (2, 2), rng)
    idx = np.array(list(np.ndindex(2, 2, 2)))
    np.testing.assert_allclose(gather(x, idx), x.full()[tuple(idx.T)], rtol=0, atol=1e-14)
    assert gather(x, np.zeros((0, 3), dtype=int)).shape == (0,)
    cores = random_cores(rng, (6, 5, 7, 4), (3, 2, 3))
    x = TTTensor(cores)
    idx = np.stack([rng.integers(0, n, 100) for n in x.shape], axis=1)
    ref = np.array([tt_entry(cores, i) for i in idx])
    assert rel(gather(x, idx), ref) < 1e-12
    with pytest.raises(IndexError):
        gather(x, np.array([[6, 0, 0, 0]]))


def test_zeros_and_scale(rng):
    z = zeros((3, 4, 2))
    assert z.ranks == (1, 1) and norm(z) == 0.0
    x = random_tt((3, 4, 2), (2, 2), rng)
    assert rel(x.scale(-2.0).full(), -2.0 * x.full()) < 1e-14


# ---------------------------------------------------------------------------
# truncated SVD and the projection inequalities
# ---------------------------------------------------------------------------


def _stiefel(rng, n, s):
    q, _ = np.linalg.qr(rng.standard_normal((n, s)))
    return q


def test_truncated_svd_identity_example():
    A = np.eye(3)
    svd = truncated_svd(A, 2)
    PA = svd.U @ (svd.U.T @ A)
    assert np.linalg.norm(PA) ** 2 == pytest.approx(2.0)
    assert np.linalg.norm(PA) ** 2 >= (2 / 3) * 3


def test_truncated_svd_factors(rng):
    A = rng.standard_normal((10, 4)) @ rng.standard_normal((4, 8))
    svd = truncated_svd(A, 4)
    np.testing.assert_allclose(svd.U.T @ svd.U, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(svd.V.T @ svd.V, np.eye(4), atol=1e-12)
    assert np.all(np.diff(svd.S) <= 0)
    assert rel(svd.U @ np.diag(svd.S) @ svd.V.T, A) < 1e-10
    big = truncated_svd(A, 20)
    assert big.clamped and big.U.shape[1] == 8
    with pytest.raises(ValueError):
        truncated_svd(A, 0)


@pytest.mark.parametrize("shape,rank", [((10, 8), 5), ((6, 12), 6), ((15, 15), 9)])
def test_projection_inequalities_100_matrices(rng, shape, rank):
    n, m = shape
    for trial in range(100):
        A = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, m))
        s = 1 + trial % (rank - 1)
        svd = truncated_svd(A, s)
        nA2 = np.linalg.norm(A) ** 2
        PuA = svd.U @ (svd.U.T @ A)
        APv = (A @ svd.V) @ svd.V.T
        U = _stiefel(rng, n, s)
        V = _stiefel(rng, m, s)
        slack = 1e-12 * nA2
        assert np.linalg.norm(PuA) ** 2 >= np.linalg.norm(U @ (U.T @ A)) ** 2 - slack
        assert np.linalg.norm(PuA) ** 2 >= (s / rank) * nA2 - slack
        assert np.linalg.norm(APv) ** 2 >= np.linalg.norm((A @ V) @ V.T) ** 2 - slack
        assert np.linalg.norm(APv) ** 2 >= (s / rank) * nA2 - slack


def test_right_projection_beats_random_subspaces(rng):
    A = rng.standard_normal((10, 5)) @ rng.standard_normal((5, 8))
    svd = truncated_svd(A, 3)
    best = np.linalg.norm(A @ svd.V @ svd.V.T)
    for _ in range(50):
        V = _stiefel(rng, 8, 3)
        assert best >= np.linalg.norm(A @ V @ V.T) - 1e-12
