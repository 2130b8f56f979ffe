"""Analytic benchmark problems with exact objective and gradient oracles.

Every problem exposes ``d``, ``M``, ``values(x) -> (M,)`` and
``jacobian(x) -> (d, M)`` where column m is the gradient of objective m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InvalidInputError, RngStream

TOY_LOG_GUARD = 5e-6


@dataclass(frozen=True)
class ToyProblem:
    """Fixed two-objective problem on R^2 mixing log trenches and quadratic valleys.

    Two tanh gates on x2 blend a pair of guarded-log objectives (active for
    x2 > 0) with a pair of shifted quadratic valleys (active for x2 < 0).
    The guard inside the log is ``log(max(|u|, 5e-6))``.

    ``corrected_r=True`` (default) makes the small quadratic term in the
    valley objectives depend on x2, i.e. ``0.1 (-x2 - 8)^2``; the literal
    variant uses x1 there instead. At kinks of max(., 0) and of the log
    guard, the one-sided derivative from the positive side is used.
    """

    corrected_r: bool = True

    d: int = field(default=2, init=False)
    M: int = field(default=2, init=False)

    def values(self, x) -> np.ndarray:
        f1, f2 = self._eval(float(x[0]), float(x[1]))
        return np.array([f1, f2])

    def jacobian(self, x) -> np.ndarray:
        _, _, J = self._eval_grad(float(x[0]), float(x[1]))
        return J

    def value_and_jacobian(self, x):
        f1, f2, J = self._eval_grad(float(x[0]), float(x[1]))
        return np.array([f1, f2]), J

    def _pieces(self, x1: float, x2: float):
        th = math.tanh(x2)
        u1 = -0.5 * x1 - 3.5 + th
        u2 = u1 + 2.0
        q1 = math.log(max(abs(u1), TOY_LOG_GUARD)) + 6.0
        q2 = math.log(max(abs(u2), TOY_LOG_GUARD)) + 6.0
        if self.corrected_r:
            quad_small = 0.1 * (-x2 - 8.0) ** 2
        else:
            quad_small = 0.1 * (-x1 - 8.0) ** 2
        r1 = ((-x1 + 7.0) ** 2 + quad_small) / 10.0 - 20.0
        r2 = ((-x1 - 7.0) ** 2 + quad_small) / 10.0 - 20.0
        th_half = math.tanh(0.5 * x2)
        p1 = max(th_half, 0.0)
        p2 = max(-th_half, 0.0)
        return th, u1, u2, q1, q2, r1, r2, th_half, p1, p2

    def _eval(self, x1: float, x2: float):
        _, _, _, q1, q2, r1, r2, _, p1, p2 = self._pieces(x1, x2)
        return p1 * q1 + p2 * r1, p1 * q2 + p2 * r2

    def _eval_grad(self, x1: float, x2: float):
        th, u1, u2, q1, q2, r1, r2, th_half, p1, p2 = self._pieces(x1, x2)

        sech2 = 1.0 - th * th
        dq1_x1 = -0.5 / u1 if abs(u1) >= TOY_LOG_GUARD else 0.0
        dq2_x1 = -0.5 / u2 if abs(u2) >= TOY_LOG_GUARD else 0.0
        dq1_x2 = sech2 / u1 if abs(u1) >= TOY_LOG_GUARD else 0.0
        dq2_x2 = sech2 / u2 if abs(u2) >= TOY_LOG_GUARD else 0.0

        dr1_x1 = (x1 - 7.0) / 5.0
        dr2_x1 = (x1 + 7.0) / 5.0
        if self.corrected_r:
            dr_x2 = 0.02 * (x2 + 8.0)
        else:
            dr_x2 = 0.0
            dr1_x1 += 0.02 * (x1 + 8.0)
            dr2_x1 += 0.02 * (x1 + 8.0)

        sech2_half = 1.0 - th_half * th_half
        dp1 = 0.5 * sech2_half if th_half >= 0.0 else 0.0
        dp2 = -0.5 * sech2_half if -th_half >= 0.0 else 0.0

        g1x1 = p1 * dq1_x1 + p2 * dr1_x1
        g2x1 = p1 * dq2_x1 + p2 * dr2_x1
        g1x2 = dp1 * q1 + p1 * dq1_x2 + dp2 * r1 + p2 * dr_x2
        g2x2 = dp1 * q2 + p1 * dq2_x2 + dp2 * r2 + p2 * dr_x2

        J = np.array([[g1x1, g2x1], [g1x2, g2x2]])
        return p1 * q1 + p2 * r1, p1 * q2 + p2 * r2, J


def toy_eval(x, corrected_r: bool = True):
    """Objective values (f1, f2) of the fixed two-objective toy problem."""
    p = ToyProblem(corrected_r=corrected_r)
    return p._eval(float(x[0]), float(x[1]))


def toy_grad(x, corrected_r: bool = True) -> np.ndarray:
    """Analytic (2, 2) Jacobian of the toy problem at x."""
    return ToyProblem(corrected_r=corrected_r).jacobian(x)


def _random_spd_family(d, M, mu, L, seed, stream):
    if not (0 < mu <= L):
        raise InvalidInputError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    rng = RngStream(seed, stream)
    A = np.empty((M, d, d))
    for m in range(M):
        Q, _ = np.linalg.qr(rng.normal((d, d)))
        diag = rng.uniform(mu, L, d)
        Am = (Q * diag) @ Q.T
        A[m] = 0.5 * (Am + Am.T)
    return A


@dataclass(frozen=True)
class QuadraticMOO:
    """Family of quadratics ``f_m(x) = 0.5 (x - b_m)' A_m (x - b_m)``.

    Each ``A_m`` is symmetric positive definite, so per-objective gradient
    Lipschitz moduli on a bounded region are available in closed form.
    """

    A: np.ndarray  # (M, d, d), each symmetric positive definite
    b: np.ndarray  # (M, d)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if A.ndim != 3 or b.ndim != 2 or A.shape[0] != b.shape[0] or A.shape[1] != A.shape[2] or A.shape[1] != b.shape[1]:
            raise InvalidInputError(f"inconsistent shapes A{A.shape}, b{b.shape}")
        for m in range(A.shape[0]):
            if np.linalg.norm(A[m] - A[m].T) > 1e-12:
                raise InvalidInputError(f"A[{m}] is not symmetric")
            if np.min(np.linalg.eigvalsh(A[m])) <= 0:
                raise InvalidInputError(f"A[{m}] is not positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @classmethod
    def random(cls, d: int, M: int, mu: float = 0.5, L: float = 2.0, seed: int = 0,
               center_scale: float = 1.0) -> "QuadraticMOO":
        """Instance with A_m = Q D Q' (Q random orthogonal, D uniform in [mu, L])."""
        A = _random_spd_family(d, M, mu, L, seed, stream=901)
        rng = RngStream(seed, 902)
        b = rng.normal((M, d), scale=center_scale)
        return cls(A=A, b=b)

    def values(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=np.float64)[None, :] - self.b
        return 0.5 * np.einsum("mi,mij,mj->m", diff, self.A, diff)

    def jacobian(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=np.float64)[None, :] - self.b
        return np.einsum("mij,mj->mi", self.A, diff).T

    def value_and_jacobian(self, x):
        diff = np.asarray(x, dtype=np.float64)[None, :] - self.b
        cols = np.einsum("mij,mj->mi", self.A, diff)
        return 0.5 * np.einsum("mi,mi->m", diff, cols), cols.T

    def gradient_norm_bound(self, radius: float) -> np.ndarray:
        """Per-objective bound on ||grad f_m|| over the ball ||x|| <= radius."""
        lmax = np.array([np.max(np.linalg.eigvalsh(self.A[m])) for m in range(self.M)])
        return lmax * (radius + np.linalg.norm(self.b, axis=1))


def quadratic_eval_grad(p: QuadraticMOO, x):
    """Objective values and column-stacked Jacobian of a quadratic family."""
    return p.value_and_jacobian(x)


@dataclass(frozen=True)
class BilevelMOO:
    """Nested family: each objective is evaluated at a lower-level optimum.

    Lower level ``l_m(x, z) = 0.5 ||z - A_m x||^2`` is 1-strongly convex in z
    with closed-form minimizer ``z*_m(x) = A_m x``; upper level
    ``f_m(x, z) = 0.5 ||z - b_m||^2``. The reduced objective is therefore
    ``0.5 ||A_m x - b_m||^2`` with exact gradient ``A_m' (A_m x - b_m)``.
    """

    A: np.ndarray  # (M, d, d)
    b: np.ndarray  # (M, d)

    mu: float = field(default=1.0, init=False)  # strong convexity of l_m in z

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @classmethod
    def random(cls, d: int, M: int, mu: float = 0.5, L: float = 2.0, seed: int = 0,
               target_scale: float = 1.0) -> "BilevelMOO":
        A = _random_spd_family(d, M, mu, L, seed, stream=903)
        rng = RngStream(seed, 904)
        b = rng.normal((M, d), scale=target_scale)
        return cls(A=np.asarray(A), b=np.asarray(b))

    def values(self, x) -> np.ndarray:
        res = np.einsum("mij,j->mi", self.A, np.asarray(x, dtype=np.float64)) - self.b
        return 0.5 * np.einsum("mi,mi->m", res, res)

    def jacobian(self, x) -> np.ndarray:
        res = np.einsum("mij,j->mi", self.A, np.asarray(x, dtype=np.float64)) - self.b
        return np.einsum("mji,mj->mi", self.A, res).T

    def value_and_jacobian(self, x):
        res = np.einsum("mij,j->mi", self.A, np.asarray(x, dtype=np.float64)) - self.b
        return 0.5 * np.einsum("mi,mi->m", res, res), np.einsum("mji,mj->mi", self.A, res).T

    # Lower/upper-level pieces used by the nested gradient estimator.

    def z_star(self, x, m: int) -> np.ndarray:
        return self.A[m] @ np.asarray(x, dtype=np.float64)

    def lower_grad_z(self, x, z, m: int) -> np.ndarray:
        return np.asarray(z) - self.A[m] @ np.asarray(x, dtype=np.float64)

    def upper_grad_x(self, x, z, m: int) -> np.ndarray:
        return np.zeros(self.d)

    def upper_grad_z(self, x, z, m: int) -> np.ndarray:
        return np.asarray(z) - self.b[m]

    def cross_xz(self, m: int) -> np.ndarray:
        # d^2 l / dx dz for l = 0.5 ||z - A x||^2
        return -self.A[m].T

    def hess_zz(self, m: int) -> np.ndarray:
        return np.eye(self.d)


def bilevel_true_grad(p: BilevelMOO, x) -> np.ndarray:
    """Exact hypergradient Jacobian, column m = A_m' (A_m x - b_m)."""
    return p.jacobian(x)


def finite_difference_jacobian(fvals, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a vector objective map (test oracle).

    ``fvals(x)`` must return the (M,) objective values.
    """
    if h <= 0:
        raise InvalidInputError(f"step size must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    f0 = np.asarray(fvals(x), dtype=np.float64)
    J = np.empty((x.size, f0.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[i] = (np.asarray(fvals(x + e)) - np.asarray(fvals(x - e))) / (2.0 * h)
    return J
