"""Stochastic gradient estimators.

Additive-noise Jacobian sampling for the single-level problems, and the
nested-loop hypergradient estimator (inner SGD on the lower level, stochastic
Neumann approximation of the Hessian inverse) for the bilevel family.

Randomness roles get independent substreams derived from one master seed:
outer samples, per-objective inner loops, per-objective Hessian estimators,
and diagnostics each own a distinct stream tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InvalidInputError, NumericDivergenceError, RngStream

# Substream tags (key = (seed, tag) in the Philox keying scheme).
STREAM_OUTER = 1
STREAM_DIAG = 3000
STREAM_INNER_BASE = 1000  # + objective index
STREAM_HESS_BASE = 2000   # + objective index


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise with mini-batch averaging.

    Effective per-entry standard deviation is ``sigma / sqrt(batch_size)``.
    """

    kind: str = "none"  # "none" | "gaussian"
    sigma: float = 0.0
    batch_size: int = 1

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise InvalidInputError(f"unknown noise kind: {self.kind!r}")
        if self.sigma < 0:
            raise InvalidInputError(f"noise sigma must be nonnegative, got {self.sigma}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch size must be >= 1, got {self.batch_size}")

    @property
    def effective_sigma(self) -> float:
        if self.kind == "none":
            return 0.0
        return self.sigma / np.sqrt(self.batch_size)


NO_NOISE = NoiseModel()


def _perturb(arr: np.ndarray, noise: NoiseModel, rng: RngStream) -> np.ndarray:
    s = noise.effective_sigma
    if s == 0.0:
        return arr
    return arr + rng.normal(arr.shape, scale=s)


def sample_jacobian(problem, x, noise: NoiseModel, rng: RngStream) -> np.ndarray:
    """Analytic Jacobian plus i.i.d. zero-mean Gaussian entry noise (unbiased)."""
    return _perturb(problem.jacobian(x), noise, rng)


class OracleStreams:
    """Per-role random substreams for one run, derived from a master stream."""

    def __init__(self, master: RngStream, M: int):
        self.outer = master.substream(STREAM_OUTER)
        self.diag = master.substream(STREAM_DIAG)
        self.inner = [master.substream(STREAM_INNER_BASE + m) for m in range(M)]
        self.hess = [master.substream(STREAM_HESS_BASE + m) for m in range(M)]


@dataclass
class InnerState:
    """Warm-started lower-level iterates, one vector per objective."""

    z: np.ndarray  # (M, d)

    @classmethod
    def zeros(cls, M: int, d: int) -> "InnerState":
        return cls(z=np.zeros((M, d)))


@dataclass(frozen=True)
class NestedOracleConfig:
    """Configuration of the nested hypergradient estimator.

    ``inner_steps`` is the number T of lower-level SGD steps per outer
    iteration (at least one). The inner step size is either a constant or the
    Robbins-Monro schedule ``1 / (mu * t)`` with t = 1..T restarting each
    outer iteration. The Hessian inverse is applied either exactly (dense
    solve of the true lower-level Hessian) or through a truncated stochastic
    Neumann series with independent Hessian samples per factor.
    """

    inner_steps: int = 1
    inner_schedule: str = "constant"  # "constant" | "robbins_monro" | "beta"
    inner_eta: float = 0.01
    inner_mu: float = 1.0
    hessian: str = "neumann"  # "exact" | "neumann"
    neumann_depth: int = 20
    neumann_scale: float = 0.5
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.inner_steps < 1:
            raise InvalidInputError("inner_steps must be >= 1 (one lower-level step minimum)")
        if self.inner_schedule not in ("constant", "robbins_monro", "beta"):
            raise InvalidInputError(f"unknown inner schedule: {self.inner_schedule!r}")
        if self.inner_schedule == "constant" and self.inner_eta <= 0:
            raise InvalidInputError("constant inner step size must be positive")
        if self.inner_schedule == "robbins_monro" and self.inner_mu <= 0:
            raise InvalidInputError("robbins_monro modulus must be positive")
        if self.hessian not in ("exact", "neumann"):
            raise InvalidInputError(f"unknown hessian mode: {self.hessian!r}")
        if self.hessian == "neumann":
            if self.neumann_depth < 1:
                raise InvalidInputError("neumann depth must be >= 1")
            if not (0.0 < self.neumann_scale <= 1.0):
                raise InvalidInputError("neumann scale must lie in (0, 1/L_zz] = (0, 1]")

    def eta(self, t: int, beta: float | None = None) -> float:
        if self.inner_schedule == "constant":
            return self.inner_eta
        if self.inner_schedule == "beta":
            # single-timescale coupling: inner step tied to the tracking step
            if beta is None:
                raise InvalidInputError("inner schedule 'beta' needs the current beta_k")
            return beta
        return 1.0 / (self.inner_mu * t)


def inner_sgd_step(problem, z, x, m: int, eta: float, noise: NoiseModel,
                   rng: RngStream) -> np.ndarray:
    """One stochastic gradient step on the lower-level objective of task m."""
    if eta <= 0:
        raise InvalidInputError(f"inner step size must be positive, got {eta}")
    g = _perturb(problem.lower_grad_z(x, z, m), noise, rng)
    return np.asarray(z) - eta * g


def _sym_noise(dim: int, sigma: float, rng: RngStream) -> np.ndarray:
    E = rng.normal((dim, dim), scale=sigma)
    return 0.5 * (E + E.T)


def neumann_apply(hess_sampler, v, depth: int, scale: float) -> np.ndarray:
    """Truncated stochastic Neumann series for ``H^{-1} v``.

    Computes ``scale * sum_{j=0}^{depth-1} prod_{i<=j} (I - scale * H_i) v``
    with an independent Hessian sample ``H_i`` per factor drawn from
    ``hess_sampler()``. Raises on runaway growth of the partial products.
    """
    v = np.asarray(v, dtype=np.float64)
    vnorm = float(np.linalg.norm(v))
    limit = 1e6 * max(vnorm, 1e-300)
    term = v.copy()
    acc = v.copy()
    for _ in range(depth - 1):
        term = term - scale * (hess_sampler() @ term)
        if float(np.linalg.norm(term)) > limit:
            raise NumericDivergenceError("Neumann series iterate exceeded 1e6 * ||v||")
        acc += term
    return scale * acc


def neumann_hessian_inverse_apply(problem, x, z, m: int, v, depth: int, scale: float,
                                  noise: NoiseModel, rng: RngStream) -> np.ndarray:
    """Stochastic Neumann approximation of ``[hess_zz l_m]^{-1} v``."""
    H = problem.hess_zz(m)
    s = noise.effective_sigma

    def sampler():
        if s == 0.0:
            return H
        return H + _sym_noise(H.shape[0], s, rng)

    return neumann_apply(sampler, v, depth, scale)


def nested_gradient_estimate(cfg: NestedOracleConfig, state: InnerState, x,
                             problem, streams: OracleStreams,
                             beta: float | None = None):
    """Biased stochastic hypergradient sample for every objective.

    For each objective m: runs T warm-started inner SGD steps on the lower
    level, freezes the resulting iterate into the returned state, and
    assembles the estimator column

        grad_x f_m  -  hess_xz l_m  @  Hzz_inv  @  grad_z f_m

    where every piece is an independently sampled stochastic quantity and
    ``Hzz_inv`` is applied per the configured mode. ``beta`` is the current
    tracking step size, needed only by the single-timescale inner schedule.

    Returns ``(h, state')`` with ``h`` of shape (d, M).
    """
    x = np.asarray(x, dtype=np.float64)
    M = problem.M
    noise = cfg.noise
    z_new = np.empty_like(state.z)
    h = np.empty((problem.d, M))
    for m in range(M):
        z = state.z[m]
        for t in range(1, cfg.inner_steps + 1):
            z = inner_sgd_step(problem, z, x, m, cfg.eta(t, beta), noise,
                               streams.inner[m])
        z_new[m] = z

        gx = _perturb(problem.upper_grad_x(x, z, m), noise, streams.outer)
        gz = _perturb(problem.upper_grad_z(x, z, m), noise, streams.outer)
        C = _perturb(problem.cross_xz(m), noise, streams.outer)
        if cfg.hessian == "exact":
            Hv = np.linalg.solve(problem.hess_zz(m), gz)
        else:
            Hv = neumann_hessian_inverse_apply(
                problem, x, z, m, gz, cfg.neumann_depth, cfg.neumann_scale,
                noise, streams.hess[m])
        h[:, m] = gx - C @ Hv
    return h, InnerState(z=z_new)


def nested_conditional_mean(cfg: NestedOracleConfig, state: InnerState, x,
                            problem) -> np.ndarray:
    """Exact conditional mean E[h | x, z] of the nested estimator.

    Uses the closed-form pieces of the problem and, in Neumann mode, the
    exact expectation of the truncated series,
    ``E[Hhat] = H^{-1} (I - (I - c H)^N)`` (independent zero-mean Hessian
    sample noise drops out of the expectation). Used by bias diagnostics.
    """
    x = np.asarray(x, dtype=np.float64)
    M = problem.M
    out = np.empty((problem.d, M))
    for m in range(M):
        H = problem.hess_zz(m)
        if cfg.hessian == "exact":
            EH = np.linalg.inv(H)
        else:
            c = cfg.neumann_scale
            T = np.eye(H.shape[0]) - c * H
            EH = np.linalg.inv(H) @ (np.eye(H.shape[0]) - np.linalg.matrix_power(T, cfg.neumann_depth))
        gz = problem.upper_grad_z(x, state.z[m], m)
        out[:, m] = problem.upper_grad_x(x, state.z[m], m) - problem.cross_xz(m) @ (EH @ gz)
    return out
