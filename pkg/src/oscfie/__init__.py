"""Solvers for (I - lam K) y = f with the oscillatory kernel exp(i kappa |s - t|) on [-1, 1]."""

from .quadrature import (
    ConvergenceError, OscillatorySum, PolyExpTerm, QuadratureSpec, apply_Kp, apply_Kp_grid,
    delta_sequence, eval_polyexp, exact_K_polyexp, p_kappa, polyexp_integral, quad_error_bound,
    reference_K, rhs_f, sup_quad_error,
)
from .system import (
    InvNormRecord, ParameterRuleError, SingularMatrixError, SystemMatrix, SystemParams,
    apply_discrete_operator, build_B, build_M, eta_bound, inv_norm, inv_norm_sweep, seminorm,
)
from .collocation import (
    CollocationSolution, PiecewiseBasis, SingularSystemError, assemble_G, basis_eval,
    eval_collocation, solve_collocation,
)
from .nn import (
    AdamState, Gradients, SinMlp, adam_step, backward, complexify, feature, forward, init_he,
    load_checkpoint, lr_schedule, save_checkpoint,
)
from .single_grade import (
    TrainConfig, TrainingDivergedError, TrainRecord, batch_loss_and_grad, train_single_grade,
    validation_loss,
)
from .multi_grade import (
    GradeSpec, GradeStack, compose_solution, grade_components, train_grade, train_multi_grade,
)

__version__ = "0.1.0"
