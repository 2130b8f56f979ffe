"""Diagnostics and evaluation quantities.

All stationarity measures are computed from exact problem gradients; the
stochastic methods under study never see these values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InvalidInputError, as_jacobian
from .subproblem import multi_gradient, solve_lambda


def pareto_stationarity(J, tol: float = 1e-10, lambda0=None) -> float:
    """Squared norm of the min-norm convex combination of gradient columns.

    Zero exactly at Pareto-stationary points (no common descent direction).
    """
    J = as_jacobian(J)
    return solve_lambda(J, 0.0, tol=tol, lambda0=lambda0).objective_value


def tracking_error(Y, J_true) -> float:
    """Frobenius distance between a tracking matrix and the exact Jacobian."""
    Y = np.asarray(Y, dtype=np.float64)
    J_true = np.asarray(J_true, dtype=np.float64)
    if Y.shape != J_true.shape:
        raise InvalidInputError(f"shape mismatch: {Y.shape} vs {J_true.shape}")
    return float(np.linalg.norm(Y - J_true))


def direction_bias(direction_sampler, x, n_sets: int, problem, rng) -> float:
    """Distance between an averaged stochastic direction and the exact one.

    Draws ``n_sets`` independent directions from ``direction_sampler(x, rng)``,
    averages them, and returns the plain norm of the difference to the exact
    multi-gradient ``d(x)`` (unregularized weights on exact gradients).
    """
    if n_sets < 1:
        raise InvalidInputError(f"need at least one sample set, got {n_sets}")
    x = np.asarray(x, dtype=np.float64)
    avg = direction_sampler(x, rng)
    for _ in range(n_sets - 1):
        avg = avg + direction_sampler(x, rng)
    avg = avg / n_sets
    J = problem.jacobian(x)
    d_exact = multi_gradient(J, solve_lambda(J, 0.0, tol=1e-10).weights)
    return float(np.linalg.norm(avg - d_exact))


def delta_m(s_method, s_baseline, higher_better) -> float:
    """Average signed relative performance drop versus a baseline.

    ``(1/M) sum_m (-1)^{l_m} (S_method_m - S_baseline_m) / S_baseline_m``
    with ``l_m = 1`` when higher values of metric m are better. Returned as a
    fraction; multiply by 100 for the percentage form.
    """
    a = np.asarray(s_method, dtype=np.float64)
    b = np.asarray(s_baseline, dtype=np.float64)
    hb = np.asarray(higher_better)
    if not (a.shape == b.shape == hb.shape) or a.ndim != 1:
        raise InvalidInputError(
            f"metric vectors must share one shape, got {a.shape}, {b.shape}, {hb.shape}"
        )
    if np.any(b == 0):
        raise InvalidInputError("baseline metric values must be nonzero")
    signs = np.where(hb.astype(bool), -1.0, 1.0)
    return float(np.mean(signs * (a - b) / b))


def regularization_gap(J, rho: float):
    """Gap ``||J lam*_rho||^2 - ||J lam*||^2`` and its bound ``rho/2 (1 - 1/M)``."""
    J = as_jacobian(J)
    if rho <= 0:
        raise InvalidInputError(f"rho must be positive, got {rho}")
    M = J.shape[1]
    lam_rho = solve_lambda(J, rho, tol=1e-10).weights
    # warm-started at lam_rho the unregularized solve only descends from there
    lam = solve_lambda(J, 0.0, tol=1e-10, lambda0=lam_rho).weights
    gap = float(np.sum((J @ lam_rho) ** 2) - np.sum((J @ lam) ** 2))
    bound = 0.5 * rho * (1.0 - 1.0 / M)
    return gap, bound


@dataclass
class BiasReport:
    """Per-checkpoint multi-gradient bias along one trajectory."""

    method: str
    ks: list = field(default_factory=list)
    samples_used: list = field(default_factory=list)  # cumulative training samples
    bias: list = field(default_factory=list)          # plain norm
    bias_sq: list = field(default_factory=list)

    def append(self, k: int, samples: int, value: float):
        self.ks.append(int(k))
        self.samples_used.append(int(samples))
        self.bias.append(float(value))
        self.bias_sq.append(float(value) ** 2)
