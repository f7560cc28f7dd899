import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttrram import _kernels_py, kernels

ckernels = pytest.importorskip("ttrram._ckernels")

BACKENDS = [_kernels_py, ckernels]


def _case(seed, m, ra, n, rb):
    rng = np.random.default_rng(seed)
    return (
        rng.standard_normal((m, ra)),
        rng.standard_normal((ra, n, rb)),
        rng.integers(0, n, m),
        rng.standard_normal((m, rb)),
        rng.standard_normal(m),
    )


dims = st.tuples(
    st.integers(0, 2**31), st.integers(0, 60), st.integers(1, 5), st.integers(1, 7), st.integers(1, 5)
)


@settings(max_examples=40, deadline=None)
@given(dims)
def test_backends_agree(params):
    seed, m, ra, n, rb = params
    L, core, col, R, y = _case(seed, m, ra, n, rb)
    outs = []
    for impl in BACKENDS:
        outs.append(
            (
                kernels.left_step(L, core, col, impl=impl),
                kernels.right_step(core, col, R, impl=impl),
                kernels.core_values(L, core, R, col, impl=impl),
                kernels.accumulate_core(L, R, y, col, n, impl=impl),
            )
        )
    for a, b in zip(*outs):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 50), st.integers(1, 4), st.integers(1, 5), st.integers(1, 5))
def test_pair_accumulation_agrees(seed, m, r, n1, n2):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((m, r))
    R = rng.standard_normal((m, r + 1))
    y = rng.standard_normal(m)
    c1, c2 = rng.integers(0, n1, m), rng.integers(0, n2, m)
    a = kernels.accumulate_pair(L, R, y, c1, c2, n1, n2, impl=_kernels_py)
    b = kernels.accumulate_pair(L, R, y, c1, c2, n1, n2, impl=ckernels)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    # explicit sum of rank-one contributions
    ref = np.zeros((r, n1, n2, r + 1))
    for s in range(m):
        ref[:, c1[s], c2[s], :] += y[s] * np.outer(L[s], R[s])
    np.testing.assert_allclose(a, ref, rtol=1e-12, atol=1e-12)


def test_accumulate_core_matches_loop(rng):
    L, core, col, R, y = _case(3, 40, 3, 6, 2)
    ref = np.zeros((3, 6, 2))
    for s in range(40):
        ref[:, col[s], :] += y[s] * np.outer(L[s], R[s])
    for impl in BACKENDS:
        np.testing.assert_allclose(kernels.accumulate_core(L, R, y, col, 6, impl=impl), ref, atol=1e-12)


def test_read_only_and_strided_inputs(rng):
    L, core, col, R, y = _case(5, 30, 2, 4, 3)
    for a in (L, core, col, R, y):
        a.setflags(write=False)
    Lf = np.asfortranarray(L)
    for impl in BACKENDS:
        v = kernels.core_values(Lf, core, R, col, impl=impl)
        ref = np.einsum("ma,amb,mb->m", L, core[:, col, :], R)
        np.testing.assert_allclose(v, ref, atol=1e-12)


def test_gather_backends(rng):
    shape, ranks = (5, 6, 4, 3), (1, 3, 2, 2, 1)
    cores = [rng.standard_normal((ranks[k], n, ranks[k + 1])) for k, n in enumerate(shape)]
    idx = np.stack([rng.integers(0, n, 200) for n in shape], axis=1)
    a = kernels.gather(cores, idx, impl=_kernels_py)
    b = kernels.gather(cores, idx, impl=ckernels)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    Lf = kernels.left_interfaces(cores, idx, impl=ckernels)
    Rt = kernels.right_interfaces(cores, idx, impl=ckernels)
    np.testing.assert_allclose(Lf[-1][:, 0], a, atol=1e-12)
    np.testing.assert_allclose(Rt[0][:, 0], a, atol=1e-12)


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
