"""Rank estimation, rank increase and decrease, and the rank-adaptive driver."""

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .completion import CGConfig, CGTrace, DegenerateDirectionError, cg_solve, exact_step
from .samples import SampleSet
from .tangent import SampleInterfaces, cone_from_matrix, retract_increase, subcone_matrix
from .tt import TTTensor, gather, max_ranks, ortho_frame, random_tt, tt_round

__all__ = [
    "estimated_rank",
    "delta_rank_matrix",
    "delta_rank_tt",
    "angle_lower_bound",
    "tt_round",
    "overfit_ratio",
    "RankEstimate",
    "estimate_tt_rank",
    "increase_rank",
    "baseline_random_increase",
    "RRAMConfig",
    "RRAMTrace",
    "rram",
    "baseline_rram",
]


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


def _gaps(sv):
    """Relative gaps ``(s_j - s_{j+1}) / s_j`` with a zero appended to ``sv``."""
    ext = np.append(sv, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (ext[:-1] - ext[1:]) / ext[:-1]
    return np.where(ext[:-1] > 0, g, 0.0)


# singular values below this fraction of the largest one are treated as zero
ZERO_RTOL = 1e-12


def _clean(sv):
    sv = np.sort(np.abs(np.asarray(sv, dtype=np.float64)))[::-1]
    if sv.size and sv[0] > 0:
        sv = np.where(sv > ZERO_RTOL * sv[0], sv, 0.0)
    return sv


def estimated_rank(sv, s, zero_tol=0.0):
    """Position of the largest relative singular-value gap among the first ``s``.

    Parameters
    ----------
    sv : array_like
        Singular values (any order).
    s : int
        Upper bound on the result.
    zero_tol : float
        The spectrum counts as zero when its largest value is ``<= zero_tol``.
        Values below ``ZERO_RTOL`` times the largest are set to zero first.

    Returns
    -------
    int
        ``0`` for a zero spectrum, otherwise a value in ``1..s``. Ties go to
        the smallest index.
    """
    if s < 1:
        raise ValueError("cap must be at least 1")
    sv = _clean(sv)
    if sv.size == 0 or sv[0] <= zero_tol:
        return 0
    g = _gaps(sv)[:s]
    return int(np.argmax(g)) + 1


def delta_rank_matrix(sv, delta):
    """Smallest ``j`` whose relative gap is at least ``delta`` (0 for zero input)."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    sv = _clean(sv)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    g = _gaps(sv)
    nz = int(np.count_nonzero(sv > 0))
    hits = np.flatnonzero(g[:nz] >= delta)
    return int(hits[0]) + 1


def delta_rank_tt(x, delta):
    """Delta-rank of every sequential unfolding, computed from the gauge cores."""
    fr = ortho_frame(x)
    out = []
    for k in range(fr.ndim - 1):
        c = fr.middle[k]
        sv = np.linalg.svd(c.reshape(-1, c.shape[2]), compute_uv=False)
        out.append(max(1, delta_rank_matrix(sv, delta)))
    return tuple(out)


def angle_lower_bound(r, r_prime):
    """``sqrt(prod r[1:] / prod r_prime[1:])`` for rank vectors ``r <= r_prime``.

    The first bond does not enter the product. For order three the product
    has a single factor.
    """
    r = np.asarray(r, dtype=np.float64)
    rp = np.asarray(r_prime, dtype=np.float64)
    if r.shape != rp.shape:
        raise ValueError("rank vectors differ in length")
    if np.any(r > rp) or np.any(r < 1):
        raise ValueError("need 1 <= r <= r_prime")
    return float(np.sqrt(np.prod(r[1:]) / np.prod(rp[1:])))


def overfit_ratio(f_gamma_now, f_gamma_prev):
    """Relative change of the test objective; ``0`` when the previous value is zero."""
    if f_gamma_prev == 0:
        return 0.0
    return (f_gamma_now - f_gamma_prev) / f_gamma_prev


def _fvals(x, s):
    if s is None or len(s) == 0:
        return 0.0
    r = gather(x, s.indices) - s.values
    return 0.5 * float(r @ r)


# ---------------------------------------------------------------------------
# rank estimation
# ---------------------------------------------------------------------------


class RankEstimate(NamedTuple):
    """Result of :func:`estimate_tt_rank`."""

    k: tuple
    x: TTTensor
    spectra: list
    trace: CGTrace


def _as_caps(v, d, name):
    if np.isscalar(v):
        return (int(v),) * (d - 1)
    v = tuple(int(a) for a in v)
    if len(v) != d - 1:
        raise ValueError(f"{name} needs {d - 1} entries")
    return v


def _residual_samples(frame, cache, omega, sign=1.0):
    return omega.with_values(sign * (cache.point_values() - omega.values))


def estimate_tt_rank(omega, r0, s_cap=8, cg=None, x0=None, rng=None, zero_tol=None):
    """Estimate the TT-rank of the tensor behind ``omega``.

    A CG run at rank ``r0`` gives ``X*``. For each bond ``i`` the estimate is
    ``r0[i]`` plus the estimated rank of the doubly projected gradient matrix
    at that bond.

    Parameters
    ----------
    omega : SampleSet
    r0 : sequence of int
    s_cap : int or sequence of int
    cg : CGConfig, optional
    x0 : TTTensor, optional
        Start of the CG run; a random train of rank ``r0`` by default.
    rng : seed or Generator, optional
    zero_tol : float, optional
        Spectra with largest value below this count as zero. Defaults to
        ``1e-8 * ||A_omega||``.
    """
    d = len(omega.shape)
    r0 = _as_caps(r0, d, "r0")
    caps = _as_caps(s_cap, d, "s_cap")
    if x0 is None:
        x0 = random_tt(omega.shape, r0, rng)
    if zero_tol is None:
        zero_tol = 1e-8 * omega.norm()
    x, trace = cg_solve(x0, omega, cg or CGConfig())
    fr = ortho_frame(x)
    cache = SampleInterfaces(fr, omega.indices)
    res = _residual_samples(fr, cache, omega)
    k, spectra = [], []
    for i in range(d - 1):
        P = subcone_matrix(fr, res, i, cache=cache)
        sv = np.linalg.svd(P, compute_uv=False)
        spectra.append(sv)
        k.append(fr.ranks[i] + estimated_rank(sv, caps[i], zero_tol))
    return RankEstimate(tuple(k), x, spectra, trace)


# ---------------------------------------------------------------------------
# rank increase and decrease
# ---------------------------------------------------------------------------


def increase_rank(x, omega, gamma, r_max, s_max, eps=1e-10, zero_tol=None, log=None):
    """Increase the TT-rank bond by bond along subcone directions.

    For each bond the doubly projected negative gradient is computed and its
    estimated rank (capped by ``s_max`` and the room left below ``r_max``)
    gives the increment. The retracted point with the exact step is accepted
    only if both ``f_omega`` and ``f_gamma`` decrease by more than ``eps``. An
    empty ``gamma`` imposes no condition.

    Parameters
    ----------
    x : TTTensor
    omega, gamma : SampleSet
    r_max, s_max : int or sequence of int
    eps : float
    zero_tol : float, optional
        Defaults to ``1e-8 * ||A_omega||``.
    log : list, optional
        Receives one ``(bond, s_i, accepted)`` tuple per examined bond.

    Returns
    -------
    TTTensor
    """
    d = x.ndim
    r_max = _as_caps(r_max, d, "r_max")
    s_max = _as_caps(s_max, d, "s_max")
    bound = max_ranks(x.shape)
    if zero_tol is None:
        zero_tol = 1e-8 * omega.norm()
    for i in range(d - 1):
        ranks = x.ranks
        cap = min(r_max[i] - ranks[i], s_max[i], bound[i] - ranks[i])
        if cap < 1:
            continue
        fr = ortho_frame(x)
        cache = SampleInterfaces(fr, omega.indices)
        res = cache.point_values() - omega.values
        f_om = 0.5 * float(res @ res)
        P = subcone_matrix(fr, omega.with_values(-res), i, cache=cache)
        sv = np.linalg.svd(P, compute_uv=False)
        s_i = estimated_rank(sv, cap, zero_tol)
        if s_i == 0:
            if log is not None:
                log.append((i, 0, False))
            continue
        direction = cone_from_matrix(fr, P, i, s_i)
        y_vals = cache.pair_values(direction.U, direction.V, i)
        try:
            t = exact_step(y_vals, res)
        except DegenerateDirectionError:
            if log is not None:
                log.append((i, s_i, False))
            continue
        x_new = retract_increase(fr, t, direction)
        new_res = gather(x_new, omega.indices) - omega.values
        dec_om = f_om - 0.5 * float(new_res @ new_res)
        ok = dec_om > eps
        if ok and gamma is not None and len(gamma):
            dec_ga = _fvals(fr.at(d - 1), gamma) - _fvals(x_new, gamma)
            ok = dec_ga > eps
        if log is not None:
            log.append((i, s_i, bool(ok)))
        if ok:
            x = x_new
    return x


def baseline_random_increase(x, i, eps=1e-8, rng=None):
    """Widen bond ``i`` by one with a random column/row pair scaled by ``eps``."""
    rng = np.random.default_rng(rng)
    d = x.ndim
    if not 0 <= i < d - 1:
        raise ValueError(f"bond {i} out of range")
    if x.ranks[i] >= max_ranks(x.shape)[i]:
        raise ValueError(f"bond {i} is already at its maximal rank")
    cores = list(x.cores)
    a, b = cores[i], cores[i + 1]
    col = eps * rng.standard_normal((a.shape[0], a.shape[1], 1))
    row = eps * rng.standard_normal((1, b.shape[1], b.shape[2]))
    cores[i] = np.concatenate([a, col], axis=2)
    cores[i + 1] = np.concatenate([b, row], axis=0)
    return TTTensor(cores)


# ---------------------------------------------------------------------------
# rank-adaptive driver
# ---------------------------------------------------------------------------


@dataclass
class RRAMConfig:
    """Parameters of :func:`rram`. Rank caps may be scalars or per-bond lists."""

    eps_omega: float = 1e-8
    eps_grad: float = 1e-8
    eps_gamma: float = 1.0
    delta: float = 0.8
    j_max: int = 15
    k_max: int = 15
    r_max: object = 10
    s_max: object = 8
    eps_decrease: float = 1e-10
    eps_stagnation: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eps_omega < 1 or not 0 < self.eps_grad < 1:
            raise ValueError("eps_omega and eps_grad must lie in (0, 1)")
        if self.eps_gamma < 0:
            raise ValueError("eps_gamma must be non-negative")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if self.eps_decrease <= 0:
            raise ValueError("eps_decrease must be positive")
        if self.j_max < 0 or self.k_max < 0:
            raise ValueError("iteration caps must be non-negative")

    def cg(self):
        return CGConfig(
            j_max=self.j_max,
            eps_grad=self.eps_grad,
            eps_rel=self.eps_omega,
            eps_stagnation=self.eps_stagnation,
        )


@dataclass
class RRAMTrace:
    """Outer-iteration log plus the concatenated inner CG series.

    ``rows`` holds ``(outer, action, ranks, f_omega_rel, f_gamma_rel,
    inner_iters_cum, wall_ms)``. Relative values are ``f / ||A||^2`` on the
    respective set. ``inner`` holds ``(inner_iters_cum, f_omega_rel,
    grad_norm, wall_ms)`` for every CG iterate.
    """

    rows: list = field(default_factory=list)
    inner: list = field(default_factory=list)

    COLUMNS = (
        "outer", "action", "ranks", "f_omega_rel", "f_gamma_rel", "inner_iters_cum", "wall_ms",
    )

    @property
    def actions(self):
        return [r[1] for r in self.rows]

    @property
    def final_action(self):
        return self.rows[-1][1] if self.rows else ""

    def ranks_after(self, outer):
        """Rank vector recorded by the last row of outer iteration ``outer``."""
        rs = [r[2] for r in self.rows if r[0] == outer]
        return rs[-1] if rs else None

    def inner_iters_to(self, level):
        """Cumulative inner iterations when ``f_omega_rel`` first drops to ``level``."""
        for it, f, _, _ in self.inner:
            if f <= level:
                return it
        return None


class _Recorder:
    def __init__(self, omega, gamma):
        self.omega = omega
        self.gamma = gamma
        na = float(omega.values @ omega.values)
        ng = float(gamma.values @ gamma.values) if gamma is not None and len(gamma) else 0.0
        self.na = na if na > 0 else 1.0
        self.ng = ng if ng > 0 else 1.0
        self.t0 = time.perf_counter()
        self.trace = RRAMTrace()
        self.inner_cum = 0

    def ms(self):
        return 1e3 * (time.perf_counter() - self.t0)

    def add_cg(self, cg_trace):
        base = self.inner_cum
        first = 1 if self.trace.inner else 0
        for it, f, g, _ in cg_trace.rows[first:]:
            self.trace.inner.append((base + it, f, g, self.ms()))
        self.inner_cum = base + cg_trace.iterations

    def row(self, outer, action, x, f_om, f_ga):
        self.trace.rows.append(
            (outer, action, tuple(x.ranks), f_om / self.na, f_ga / self.ng, self.inner_cum, self.ms())
        )


def rram(omega, gamma, x0=None, cfg=None, log=None):
    """Riemannian rank-adaptive tensor completion.

    Each outer iteration runs fixed-rank CG, then checks the overfitting
    guard on ``gamma`` and the relative residual on ``omega``. Afterwards a
    rank decrease by rounding to the Delta-rank is tried and, if it is not
    taken, a rank increase along subcone directions.

    Parameters
    ----------
    omega, gamma : SampleSet
        Training and test samples (disjoint). ``gamma`` may be empty.
    x0 : TTTensor, optional
        Defaults to a random rank-one train drawn from ``cfg.seed``.
    cfg : RRAMConfig, optional
    log : list, optional
        Receives the per-bond decisions of every rank increase.

    Returns
    -------
    x : TTTensor
    trace : RRAMTrace

    Notes
    -----
    When CG stopped on the gradient tolerance or on stagnation and the
    subsequent rank increase changes nothing, the next CG run would start
    from the same point, so the method stops with ``stop-converged``.
    """
    cfg = cfg or RRAMConfig()
    d = len(omega.shape)
    if x0 is None:
        x0 = random_tt(omega.shape, (1,) * (d - 1), cfg.seed)
    r_max = _as_caps(cfg.r_max, d, "r_max")
    s_max = _as_caps(cfg.s_max, d, "s_max")
    rec = _Recorder(omega, gamma)
    norm_a = omega.norm() or 1.0

    x_prev = x0
    fg_prev = _fvals(x0, gamma)
    x_new = x0
    for k in range(1, cfg.k_max + 1):
        x, cg_trace = cg_solve(x_new, omega, cfg.cg())
        rec.add_cg(cg_trace)
        f_om = _fvals(x, omega)
        f_ga = _fvals(x, gamma)
        rec.row(k, "cg", x, f_om, f_ga)
        if gamma is not None and len(gamma) and overfit_ratio(f_ga, fg_prev) > cfg.eps_gamma:
            rec.row(k, "stop-overfit", x_prev, _fvals(x_prev, omega), fg_prev)
            return x_prev, rec.trace
        if np.sqrt(2.0 * f_om) / norm_a < cfg.eps_omega:
            rec.row(k, "stop-converged", x, f_om, f_ga)
            return x, rec.trace
        if k == cfg.k_max:
            break
        x_prev, fg_prev = x, f_ga

        r_delta = delta_rank_tt(x, cfg.delta)
        if sum(r_delta) < sum(x.ranks):
            x_d = tt_round(x, r_delta)
            fo_d, fg_d = _fvals(x_d, omega), _fvals(x_d, gamma)
            if fo_d < f_om or (gamma is not None and len(gamma) and fg_d < f_ga):
                x_new = x_d
                rec.row(k, "decrease", x_d, fo_d, fg_d)
                continue
        x_new = increase_rank(x, omega, gamma, r_max, s_max, cfg.eps_decrease, log=log)
        if x_new is x and cg_trace.stop_reason in ("gradient", "stagnation"):
            rec.row(k, "stop-converged", x, f_om, f_ga)
            return x, rec.trace
        if x_new is not x:
            rec.row(k, "increase", x_new, _fvals(x_new, omega), _fvals(x_new, gamma))
    rec.row(cfg.k_max, "stop-budget", x, f_om, f_ga)
    return x, rec.trace


def baseline_rram(omega, gamma, x0=None, cfg=None, r_cap=None, eps=1e-8):
    """Rank adaptation by random unit increases, for comparison with :func:`rram`.

    CG phases alternate with :func:`baseline_random_increase` applied to one
    bond at a time in cyclic order, skipping bonds at ``r_cap``. The run stops
    on the same relative-residual tolerance as :func:`rram`, on the overfitting
    guard, after ``cfg.k_max`` outer iterations, or after the CG phase that
    follows the last possible increase.
    """
    cfg = cfg or RRAMConfig()
    d = len(omega.shape)
    rng = np.random.default_rng(cfg.seed + 1)
    if x0 is None:
        x0 = random_tt(omega.shape, (1,) * (d - 1), cfg.seed)
    cap = _as_caps(cfg.r_max if r_cap is None else r_cap, d, "r_cap")
    bound = max_ranks(omega.shape)
    cap = tuple(min(c, b) for c, b in zip(cap, bound))
    rec = _Recorder(omega, gamma)
    norm_a = omega.norm() or 1.0

    x_prev, fg_prev = x0, _fvals(x0, gamma)
    x_new = x0
    bond = 0
    for k in range(1, cfg.k_max + 1):
        x, cg_trace = cg_solve(x_new, omega, cfg.cg())
        rec.add_cg(cg_trace)
        f_om, f_ga = _fvals(x, omega), _fvals(x, gamma)
        rec.row(k, "cg", x, f_om, f_ga)
        if gamma is not None and len(gamma) and overfit_ratio(f_ga, fg_prev) > cfg.eps_gamma:
            rec.row(k, "stop-overfit", x_prev, _fvals(x_prev, omega), fg_prev)
            return x_prev, rec.trace
        if np.sqrt(2.0 * f_om) / norm_a < cfg.eps_omega:
            rec.row(k, "stop-converged", x, f_om, f_ga)
            return x, rec.trace
        if k == cfg.k_max:
            break
        x_prev, fg_prev = x, f_ga
        open_bonds = [i for i in range(d - 1) if x.ranks[i] < cap[i]]
        if not open_bonds:
            rec.row(k, "stop-converged", x, f_om, f_ga)
            return x, rec.trace
        while x.ranks[bond] >= cap[bond]:
            bond = (bond + 1) % (d - 1)
        x_new = baseline_random_increase(x, bond, eps, rng)
        bond = (bond + 1) % (d - 1)
        rec.row(k, "increase", x_new, _fvals(x_new, omega), _fvals(x_new, gamma))
    rec.row(cfg.k_max, "stop-budget", x, f_om, f_ga)
    return x, rec.trace
