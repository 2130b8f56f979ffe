"""Simplex-constrained least-norm weight subproblems.

The central object is ``min_{lam in simplex} ||J lam||^2 + (rho/2) ||lam||^2``
whose solution gives the multi-gradient weights. ``solve_lambda`` is a
projected-gradient solver for any M; ``solve_lambda_closed_form_2`` is the
independent closed form for two objectives; the two ``lambda_step_*``
functions are the single incremental weight updates used inside the
correction method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError, as_jacobian, project_simplex

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 100_000


@dataclass
class LambdaSolveReport:
    """Result of a weight subproblem solve.

    ``objective_value`` is ``||J lam||^2 + (rho/2)||lam||^2`` at the returned
    weights. ``converged`` means the simplex-projected-gradient residual
    dropped below the requested tolerance within the iteration budget.
    """

    weights: np.ndarray
    objective_value: float
    iterations: int
    converged: bool


def _solve_lambda_2d(G, rho, tol, max_iters, t0):
    # Scalar parametrization lam = (t, 1-t); same projected-gradient
    # iteration as the generic path, written with plain floats for speed.
    g11 = float(G[0, 0])
    g12 = float(G[0, 1])
    g22 = float(G[1, 1])
    lip = 2.0 * float(np.linalg.norm(G, 2)) + rho
    if lip <= 0.0:
        return np.array([0.5, 0.5]), 0.0, 0, True
    step = 1.0 / lip
    half = 0.5 * step
    t = t0
    iters = 0
    converged = False
    while iters < max_iters:
        # dq/dt along the feasible direction, q = lam' (G + rho/2 I) lam
        d1 = 2.0 * (g11 * t + g12 * (1.0 - t)) + rho * t
        d2 = 2.0 * (g12 * t + g22 * (1.0 - t)) + rho * (1.0 - t)
        t_new = t - half * (d1 - d2)
        if t_new < 0.0:
            t_new = 0.0
        elif t_new > 1.0:
            t_new = 1.0
        iters += 1
        gap = abs(t - t_new) * np.sqrt(2.0) / step
        t = t_new
        if gap <= tol:
            converged = True
            break
    lam = np.array([t, 1.0 - t])
    obj = float(lam @ G @ lam) + 0.5 * rho * float(lam @ lam)
    return lam, obj, iters, converged


def solve_lambda(J, rho: float = 0.0, tol: float = DEFAULT_TOL,
                 max_iters: int = DEFAULT_MAX_ITERS, lambda0=None) -> LambdaSolveReport:
    """Minimize ``||J lam||^2 + (rho/2)||lam||^2`` over the simplex.

    Projected gradient descent with constant step ``1 / (||J'J||_2 + rho)``,
    stopping when the projected-gradient residual
    ``||lam - P(lam - s grad)|| / s`` falls below ``tol``. Exhausting
    ``max_iters`` returns ``converged=False`` rather than raising. For
    ``rho > 0`` the minimizer is unique; for ``rho = 0`` it need not be, and
    only the objective value is well defined.

    ``lambda0`` optionally warm-starts the iteration (defaults to uniform).
    """
    J = as_jacobian(J)
    if rho < 0:
        raise InvalidInputError(f"regularization must be nonnegative, got {rho}")
    M = J.shape[1]
    if M == 1:
        lam = np.array([1.0])
        obj = float(J[:, 0] @ J[:, 0]) + 0.5 * rho
        return LambdaSolveReport(lam, obj, 0, True)

    G = J.T @ J
    if lambda0 is None:
        lam = np.full(M, 1.0 / M)
    else:
        lam = project_simplex(np.asarray(lambda0, dtype=np.float64))

    if M == 2:
        w, obj, iters, conv = _solve_lambda_2d(G, rho, tol, max_iters, float(lam[0]))
        return LambdaSolveReport(w, obj, iters, conv)

    lip = float(np.linalg.norm(G, 2)) + rho
    if lip <= 0.0:
        # Zero Jacobian and rho = 0: every feasible point is optimal.
        return LambdaSolveReport(lam, 0.0, 0, True)
    step = 1.0 / lip
    iters = 0
    converged = False
    while iters < max_iters:
        grad = 2.0 * (G @ lam) + rho * lam
        lam_new = project_simplex(lam - step * grad)
        iters += 1
        gap = float(np.linalg.norm(lam - lam_new)) / step
        lam = lam_new
        if gap <= tol:
            converged = True
            break
    obj = float(lam @ G @ lam) + 0.5 * rho * float(lam @ lam)
    return LambdaSolveReport(lam, obj, iters, converged)


def solve_lambda_closed_form_2(g1, g2) -> float:
    """Closed-form min-norm weight for two objectives.

    Returns ``clip((g2 - g1) . g2 / ||g1 - g2||^2, 0, 1)``, the weight on
    ``g1``. Identical gradients make every weight equivalent; 0.5 is returned
    by convention.
    """
    g1 = np.asarray(g1, dtype=np.float64)
    g2 = np.asarray(g2, dtype=np.float64)
    if g1.shape != g2.shape:
        raise InvalidInputError(f"gradient shapes differ: {g1.shape} vs {g2.shape}")
    diff = g1 - g2
    denom = float(diff @ diff)
    if denom == 0.0:
        return 0.5
    raw = float((g2 - g1) @ g2) / denom
    return min(max(raw, 0.0), 1.0)


def lambda_step_regularized(lam, Y, rho: float, gamma: float) -> np.ndarray:
    """One projected-gradient weight step: ``P(lam - gamma (Y'Y + rho I) lam)``."""
    Y = np.asarray(Y, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != lam.size:
        raise InvalidInputError(
            f"dimension mismatch: tracking matrix {Y.shape} versus weights {lam.shape}"
        )
    grad = Y.T @ (Y @ lam) + rho * lam
    return project_simplex(lam - gamma * grad)


def lambda_step_softmax(lam, Y, rho: float, gamma: float) -> np.ndarray:
    """Softmax variant of the weight step; always strictly interior."""
    Y = np.asarray(Y, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != lam.size:
        raise InvalidInputError(
            f"dimension mismatch: tracking matrix {Y.shape} versus weights {lam.shape}"
        )
    raw = lam - gamma * (Y.T @ (Y @ lam) + rho * lam)
    e = np.exp(raw - np.max(raw))
    return e / np.sum(e)


def multi_gradient(J, lam) -> np.ndarray:
    """The combined descent direction ``J lam``."""
    from .core import matvec

    return matvec(J, lam)
