"""Data generators and experiment runners.

All randomness flows from one ``numpy.random.Generator`` (PCG64) per run, so
a run is reproducible from its integer seed. Functions accepting ``seed``
also accept an existing ``Generator``.
"""

from dataclasses import dataclass, field

import numpy as np

from .completion import CGConfig
from .rank import (
    RRAMConfig,
    angle_lower_bound,
    baseline_rram,
    estimate_tt_rank,
    rram,
)
from .samples import SampleSet
from .tt import DENSE_CAP, TTTensor, gather, inner, norm, random_tt, tt_round, unfold


def gen_synthetic(dims, r_prime, seed=None):
    """Train with standard-normal cores of ranks ``r_prime``.

    Entries have standard deviation close to ``sqrt(prod(r_prime))``. Use
    ``.full()`` for the dense tensor.
    """
    return random_tt(dims, r_prime, seed)


def add_noise(a, eta, seed=None):
    """``a + eta * N(0, 1)`` entrywise."""
    if eta < 0:
        raise ValueError("noise level must be non-negative")
    a = np.asarray(a, dtype=np.float64)
    if eta == 0:
        return a.copy()
    rng = np.random.default_rng(seed)
    return a + eta * rng.standard_normal(a.shape)


def gen_exponential(n=20, d=4):
    """``exp(-||x||_2)`` on the uniform grid of ``n`` points per axis in ``[0, 1]^d``."""
    t = np.linspace(0.0, 1.0, n)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    return np.exp(-np.sqrt(sum(g * g for g in grids)))


def sample_split(a, rho_omega, gamma_fraction=0.25, seed=None, noise=0.0):
    """Disjoint training and test samples drawn from one random permutation.

    Parameters
    ----------
    a : ndarray or TTTensor
    rho_omega : float
        Sampling ratio of the training set, ``|omega| = round(rho * N)``.
    gamma_fraction : float
        ``|gamma| = round(gamma_fraction * |omega|)``.
    seed : int or Generator, optional
    noise : float
        Standard deviation of Gaussian noise added to the sampled values.

    Returns
    -------
    omega, gamma : SampleSet
    """
    if not 0 < rho_omega <= 1:
        raise ValueError("sampling ratio must lie in (0, 1]")
    if gamma_fraction < 0:
        raise ValueError("gamma_fraction must be non-negative")
    rng = np.random.default_rng(seed)
    shape = tuple(a.shape)
    total = int(np.prod(shape))
    m = int(round(rho_omega * total))
    g = int(round(gamma_fraction * m))
    if m + g > total:
        raise ValueError("not enough entries for the requested sample sizes")
    flat = rng.choice(total, size=m + g, replace=False)
    idx = np.stack(np.unravel_index(flat, shape), axis=1).astype(np.int64)
    if isinstance(a, TTTensor):
        vals = gather(a, idx)
    else:
        vals = np.asarray(a, dtype=np.float64)[tuple(idx.T)]
    if noise:
        vals = vals + noise * rng.standard_normal(vals.shape)
    return (
        SampleSet(idx[:m], vals[:m], shape, validate=False),
        SampleSet(idx[m:], vals[m:], shape, validate=False),
    )


def _gaps(sv):
    ext = np.append(sv, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ext[:-1] > 0, (ext[:-1] - ext[1:]) / ext[:-1], 0.0)


# ---------------------------------------------------------------------------
# rank estimation
# ---------------------------------------------------------------------------


@dataclass
class RankReport:
    """Per-bond spectra behind a rank estimate.

    ``rows`` holds one dict per bond with the leading singular values of the
    projected gradient matrix, their relative gaps, and the leading singular
    values of the sampled and full unfoldings (when the dense tensor fits the
    budget).
    """

    k: tuple
    r_prime: tuple
    grad_norm: float
    iterations: int
    rows: list = field(default_factory=list)

    @property
    def correct(self):
        return tuple(self.k) == tuple(self.r_prime)


def run_rank_estimation(
    dims, r_prime, r0=None, rho=0.3, iters=15, noise=0.0, seed=0, s_cap=6, top=7
):
    """Generate data, sample it, and estimate the TT-rank from the samples.

    The leading ``top`` singular values are reported per bond; the default
    cap ``s_cap = top - 1`` keeps the estimate within the reported gaps.
    """
    rng = np.random.default_rng(seed)
    dims = tuple(dims)
    d = len(dims)
    r_prime = tuple(r_prime)
    r0 = tuple(r0) if r0 is not None else (1,) * (d - 1)
    a_tt = gen_synthetic(dims, r_prime, rng)
    dense_ok = int(np.prod(dims)) <= DENSE_CAP
    if dense_ok:
        a_full = add_noise(a_tt.full(), noise, rng)
        omega, _ = sample_split(a_full, rho, 0.0, rng)
        a_om = omega.dense()
    else:
        omega, _ = sample_split(a_tt, rho, 0.0, rng, noise=noise)
    x0 = random_tt(dims, r0, rng)
    cg = CGConfig(j_max=iters)
    est = estimate_tt_rank(omega, r0, s_cap, cg, x0=x0)
    report = RankReport(est.k, r_prime, float(est.trace.grad_norm[-1]), est.trace.iterations)
    for i, sv in enumerate(est.spectra):
        row = {
            "bond": i,
            "k": est.k[i],
            "p_sv": sv[:top],
            "p_gap": _gaps(sv)[:top],
        }
        if dense_ok:
            s_om = np.linalg.svd(unfold(a_om, i + 1), compute_uv=False)
            s_a = np.linalg.svd(unfold(a_full, i + 1), compute_uv=False)
            row["omega_sv"] = s_om[:top]
            row["omega_gap"] = _gaps(s_om)[:top]
            row["a_sv"] = s_a[:top]
        report.rows.append(row)
    return report


# ---------------------------------------------------------------------------
# angle condition of rounding
# ---------------------------------------------------------------------------


@dataclass
class AngleReport:
    values: np.ndarray
    omega: float
    necessary_residuals: np.ndarray

    def summary(self):
        v = self.values
        return {"min": float(v.min()), "median": float(np.median(v)), "max": float(v.max())}


def run_angle_experiment(trials=20, dims=(10, 10, 10, 10), r_prime=4, r=2, seed=0):
    """Alignment of rounded random trains with the originals.

    For each trial ``A`` is a random train of rank ``r_prime`` and ``X`` its
    rounding to rank ``r``. Reports ``<X/||X||, A/||A||>``, the lower bound
    ``omega`` and the relative residual ``|<X, A> - ||X||^2| / ||A||^2``.
    """
    rng = np.random.default_rng(seed)
    dims = tuple(dims)
    d = len(dims)
    rp = (r_prime,) * (d - 1) if np.isscalar(r_prime) else tuple(r_prime)
    rr = (r,) * (d - 1) if np.isscalar(r) else tuple(r)
    vals, resid = [], []
    for _ in range(trials):
        a = gen_synthetic(dims, rp, rng)
        x = tt_round(a, rr)
        na, nx = norm(a), norm(x)
        ip = inner(x, a)
        vals.append(ip / (na * nx))
        resid.append(abs(ip - nx * nx) / (na * na))
    return AngleReport(np.array(vals), angle_lower_bound(rr, rp), np.array(resid))


# ---------------------------------------------------------------------------
# completion
# ---------------------------------------------------------------------------


@dataclass
class CompletionResult:
    x: TTTensor
    trace: object
    omega: SampleSet
    gamma: SampleSet
    log: list = field(default_factory=list)

    @property
    def final_f_omega_rel(self):
        return self.trace.rows[-1][3]


def make_problem(kind, dims=None, r_prime=None, rho=0.1, noise=0.0, seed=0, gamma_fraction=0.25):
    """Data and sample sets for the ``synthetic`` or ``exponential`` test problems."""
    rng = np.random.default_rng(seed)
    if kind == "synthetic":
        a = gen_synthetic(dims, r_prime, rng)
    elif kind == "exponential":
        dims = tuple(dims) if dims is not None else (20,) * 4
        a = gen_exponential(dims[0], len(dims))
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    omega, gamma = sample_split(a, rho, gamma_fraction, rng, noise=noise)
    x0 = random_tt(a.shape, (1,) * (len(a.shape) - 1), rng)
    return a, omega, gamma, x0


def run_completion(
    kind="synthetic",
    dims=(20, 20, 20, 20),
    r_prime=(4, 4, 4),
    rho=0.1,
    noise=0.0,
    seed=0,
    method="rram",
    cfg=None,
    baseline_cap=None,
):
    """Complete a test problem with the rank-adaptive method or the baseline.

    The baseline receives ``baseline_cap`` as its uniform rank bound, by
    default ``max(r_prime)`` for synthetic data and ``cfg.r_max`` otherwise.
    """
    cfg = cfg or RRAMConfig(seed=seed)
    _, omega, gamma, x0 = make_problem(kind, dims, r_prime, rho, noise, seed)
    log = []
    if method == "rram":
        x, trace = rram(omega, gamma, x0, cfg, log=log)
    elif method == "baseline":
        if baseline_cap is None:
            baseline_cap = max(r_prime) if kind == "synthetic" else cfg.r_max
        x, trace = baseline_rram(omega, gamma, x0, cfg, r_cap=baseline_cap)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CompletionResult(x, trace, omega, gamma, log)


__all__ = [
    "gen_synthetic",
    "add_noise",
    "gen_exponential",
    "sample_split",
    "RankReport",
    "run_rank_estimation",
    "AngleReport",
    "run_angle_experiment",
    "CompletionResult",
    "make_problem",
    "run_completion",
]
