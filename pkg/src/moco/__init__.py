"""Stochastic multi-objective gradient methods on analytic benchmarks."""

from .core import (InvalidInputError, NumericDivergenceError, RngStream,
                   matvec, project_ball, project_simplex)
from .metrics import (BiasReport, delta_m, direction_bias, pareto_stationarity,
                      regularization_gap, tracking_error)
from .oracles import (InnerState, NestedOracleConfig, NoiseModel, OracleStreams,
                      inner_sgd_step, nested_gradient_estimate,
                      neumann_hessian_inverse_apply, sample_jacobian)
from .problems import (BilevelMOO, QuadraticMOO, ToyProblem, bilevel_true_grad,
                       finite_difference_jacobian, quadratic_eval_grad, toy_eval,
                       toy_grad)
from .solvers import (MethodDriver, MoCoState, StepSchedule, TrajectoryRecord,
                      cagrad_step, mgda_step, moco_step, pcgrad_step, run,
                      smg_step)
from .subproblem import (LambdaSolveReport, lambda_step_regularized,
                         lambda_step_softmax, multi_gradient, solve_lambda,
                         solve_lambda_closed_form_2)

__version__ = "0.1.0"
