"""Completion objective and the fixed-rank Riemannian conjugate-gradient solver."""

import time
from dataclasses import dataclass, field

import numpy as np

from .samples import SampleSet
from .tangent import (
    SampleInterfaces,
    as_frame,
    project_tangent,
    retract_fixed_rank,
    tangent_to_tt,
)
from .tt import TTTensor, gather, ortho_frame, random_tt


class DegenerateDirectionError(ArithmeticError):
    """A search direction vanishes on the sampling set."""


def _check(x, omega):
    if tuple(x.shape) != tuple(omega.shape):
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(omega.shape)}")


def residual(x, omega):
    """Sampled residual ``X_omega - A_omega`` as a :class:`SampleSet`."""
    _check(x, omega)
    if len(omega) == 0:
        return omega.with_values(np.zeros(0))
    if not isinstance(x, TTTensor):
        x = as_frame(x).at(x.ndim - 1)
    return omega.with_values(gather(x, omega.indices) - omega.values)


def objective(x, omega):
    """``0.5 * ||X_omega - A_omega||^2``."""
    r = residual(x, omega).values
    return 0.5 * float(r @ r)


def exact_step(dir_samples, resid):
    """Minimiser ``t`` of ``t -> 0.5 ||resid + t * dir_samples||^2``.

    Raises
    ------
    DegenerateDirectionError
        If the direction is zero on the sampling set.
    """
    y = np.asarray(dir_samples, dtype=np.float64)
    r = resid.values if isinstance(resid, SampleSet) else np.asarray(resid, dtype=np.float64)
    denom = float(y @ y)
    if denom == 0.0:
        raise DegenerateDirectionError("direction vanishes on the sampling set")
    return -float(r @ y) / denom


def riemannian_gradient(x, omega, cache=None):
    """Projection of the sampled residual onto the tangent space at ``x``."""
    frame = as_frame(x)
    if cache is None:
        cache = SampleInterfaces(frame, omega.indices)
    res = omega.with_values(cache.point_values() - omega.values)
    return project_tangent(frame, res, cache=cache)


@dataclass
class CGConfig:
    """Stopping parameters of :func:`cg_solve`.

    The run stops after ``j_max`` iterations, when the Riemannian gradient
    norm drops below ``eps_grad``, when ``sqrt(2 f) / ||A_omega||`` drops below
    ``eps_rel``, or when the relative change of ``sqrt(2 f)`` between two
    iterations is below ``eps_stagnation``.
    """

    j_max: int = 15
    eps_grad: float = 1e-8
    eps_rel: float = 1e-8
    eps_stagnation: float = 1e-8

    def __post_init__(self):
        if self.j_max < 0:
            raise ValueError("j_max must be non-negative")
        for name in ("eps_grad", "eps_rel", "eps_stagnation"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class CGTrace:
    """Per-iteration record: ``iter, f_omega_rel, grad_norm, wall_ms``.

    ``f_omega_rel`` is ``f_omega / ||A_omega||^2``. ``stop_reason`` is one of
    ``max-iter``, ``gradient``, ``residual``, ``stagnation``, ``no-descent``.
    """

    rows: list = field(default_factory=list)
    stop_reason: str = ""

    COLUMNS = ("iter", "f_omega_rel", "grad_norm", "wall_ms")

    @property
    def iterations(self):
        return self.rows[-1][0] if self.rows else 0

    @property
    def f_omega_rel(self):
        return np.array([r[1] for r in self.rows])

    @property
    def grad_norm(self):
        return np.array([r[2] for r in self.rows])


class _Point:
    """Point with its frame, sample interfaces and sampled residual."""

    def __init__(self, x, omega):
        self.frame = as_frame(x)
        self.cache = SampleInterfaces(self.frame, omega.indices)
        self.res = self.cache.point_values() - omega.values
        self.f = 0.5 * float(self.res @ self.res)

    def change_from(self, other):
        """``f(self) - f(other)`` without cancellation between large values."""
        return 0.5 * float((self.res - other.res) @ (self.res + other.res))


def _try_step(pt, eta, omega, max_halvings=30, max_stretch=16.0):
    """Exact step along ``eta`` with halving until ``f`` does not increase.

    When the first trial succeeds, a parabola through ``f(0)``, the slope at
    ``0`` and the value at the trial step is used to propose one longer step
    along the retraction curve; it is kept only if it lowers ``f`` further.
    The linearised step ignores curvature and can be far too short when the
    residual is large.
    """
    eta_vals = pt.cache.tangent_values(eta)
    t = exact_step(eta_vals, pt.res)
    slope = float(pt.res @ eta_vals)
    for h in range(max_halvings + 1):
        cand = _Point(retract_fixed_rank(None, t, eta), omega)
        if cand.change_from(pt) <= 0:
            break
        t *= 0.5
    else:
        return None
    if h == 0 and slope < 0:
        curv = cand.change_from(pt) - slope * t
        t_new = -slope * t * t / (2.0 * curv) if curv > 0 else max_stretch * t
        t_new = min(t_new, max_stretch * t)
        if t_new > 1.25 * t:
            far = _Point(retract_fixed_rank(None, t_new, eta), omega)
            if far.change_from(cand) < 0:
                cand = far
    return cand


def cg_solve(x0, omega, cfg=None, rng=None):
    """Riemannian conjugate gradients at fixed TT-rank.

    Parameters
    ----------
    x0 : TTTensor or None
        Starting point. ``None`` starts from a random rank-one train.
    omega : SampleSet
    cfg : CGConfig, optional
    rng : seed or Generator, optional
        Used only when ``x0`` is ``None``.

    Returns
    -------
    x : TTTensor
        Final iterate, ``(d-1)``-orthogonal.
    trace : CGTrace

    Notes
    -----
    Directions follow the Polak-Ribiere rule with a non-negativity clamp,
    transporting the previous direction and gradient by orthogonal
    projection. The step starts from the exact minimiser along the tangent
    direction; if the retracted point does not decrease the objective the step
    is halved, and as a last resort the steepest-descent direction is used. The trace of
    ``f_omega`` is therefore non-increasing.
    """
    cfg = cfg or CGConfig()
    if x0 is None:
        x0 = random_tt(omega.shape, (1,) * (len(omega.shape) - 1), rng)
    _check(x0, omega)
    t0 = time.perf_counter()
    norm_a2 = float(omega.values @ omega.values)
    scale = norm_a2 if norm_a2 > 0 else 1.0
    trace = CGTrace()

    pt = _Point(x0, omega)
    prev_dir = prev_grad = None
    drop = None  # sqrt(2 f) before the last step minus after it
    it = 0
    while True:
        grad = project_tangent(pt.frame, omega.with_values(pt.res), cache=pt.cache)
        gn = grad.norm()
        ms = 1e3 * (time.perf_counter() - t0)
        trace.rows.append((it, pt.f / scale, gn, ms))
        root = np.sqrt(2.0 * pt.f)
        if it >= cfg.j_max:
            trace.stop_reason = "max-iter"
            break
        if gn < cfg.eps_grad:
            trace.stop_reason = "gradient"
            break
        if root / np.sqrt(scale) < cfg.eps_rel:
            trace.stop_reason = "residual"
            break
        if drop is not None and drop < cfg.eps_stagnation * root:
            trace.stop_reason = "stagnation"
            break

        steepest = -grad
        eta = steepest
        if prev_dir is not None:
            d_t = project_tangent(pt.frame, tangent_to_tt(prev_dir))
            g_t = project_tangent(pt.frame, tangent_to_tt(prev_grad))
            gg = prev_grad.inner(prev_grad)
            beta = max(0.0, grad.inner(grad - g_t) / gg) if gg > 0 else 0.0
            eta = steepest + beta * d_t
            if eta.inner(grad) >= 0:
                eta = steepest

        nxt = None
        for cand_dir in (eta, steepest) if eta is not steepest else (steepest,):
            try:
                nxt = _try_step(pt, cand_dir, omega)
            except DegenerateDirectionError:
                nxt = None
            if nxt is not None:
                eta = cand_dir
                break
        if nxt is None:
            trace.stop_reason = "no-descent"
            break
        delta = -nxt.change_from(pt)
        drop = 2.0 * delta / (root + np.sqrt(2.0 * nxt.f)) if delta > 0 else 0.0
        prev_dir, prev_grad = eta, grad
        pt = nxt
        it += 1

    d = pt.frame.ndim
    return pt.frame.at(d - 1), trace
