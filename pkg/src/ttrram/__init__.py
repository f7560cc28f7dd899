"""Tensor-train toolkit with Riemannian rank-adaptive tensor completion."""

from .completion import CGConfig, CGTrace, cg_solve, exact_step, objective, residual, riemannian_gradient
from .kernels import BACKEND
from .rank import (
    RRAMConfig,
    RRAMTrace,
    angle_lower_bound,
    baseline_random_increase,
    baseline_rram,
    delta_rank_matrix,
    delta_rank_tt,
    estimate_tt_rank,
    estimated_rank,
    increase_rank,
    overfit_ratio,
    rram,
)
from .samples import SampleSet
from .tangent import (
    ConeDirection,
    TangentVector,
    change_gauge,
    project_subcone,
    project_tangent,
    retract_fixed_rank,
    retract_increase,
    subcone_matrix,
    tangent_to_tt,
)
from .tt import (
    OrthoFrame,
    TTTensor,
    contract,
    fold,
    gather,
    inner,
    norm,
    ortho_frame,
    orthogonalize,
    random_tt,
    reconstruct,
    truncated_svd,
    tt_axpy,
    tt_round,
    tt_svd,
    unfold,
    unfold3,
)

__version__ = "0.1.0"
