"""Dense vector/matrix primitives, projections, and seeded randomness.

Conventions used throughout the package:

* a decision point ``x`` is a 1-d float64 array of length ``d``,
* a Jacobian ``J`` is a ``(d, M)`` float64 array whose m-th *column* is the
  gradient of objective m,
* simplex weights ``lam`` are a 1-d float64 array of length ``M`` with
  nonnegative entries summing to one.
"""

from __future__ import annotations

import numpy as np


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class NumericDivergenceError(RuntimeError):
    """An iterative computation produced unbounded or non-finite values."""


def as_point(x) -> np.ndarray:
    """Validate and convert a decision point to a float64 vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise InvalidInputError(f"decision point must be a 1-d vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("decision point has non-finite coordinates")
    return x


def as_jacobian(J) -> np.ndarray:
    """Validate and convert a column-stacked Jacobian to a (d, M) float64 array."""
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] < 1 or J.shape[1] < 1:
        raise InvalidInputError(f"Jacobian must be a (d, M) matrix, got shape {J.shape}")
    if not np.all(np.isfinite(J)):
        raise InvalidInputError("Jacobian has non-finite entries")
    return J


def check_simplex(w, *, neg_tol: float = 1e-12, sum_tol: float = 1e-10) -> np.ndarray:
    """Assert that ``w`` lies on the probability simplex (within tolerances)."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise InvalidInputError(f"weights must be a 1-d vector, got shape {w.shape}")
    if np.min(w) < -neg_tol:
        raise InvalidInputError(f"weights have a negative entry: min = {np.min(w)}")
    if abs(float(np.sum(w)) - 1.0) > sum_tol:
        raise InvalidInputError(f"weights sum to {np.sum(w)}, expected 1")
    return w


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-based O(M log M) algorithm: the threshold tau is found from the
    sorted cumulative sums and the projection is ``max(v - tau, 0)``.

    Inputs already on the simplex (entries >= 0, sum within 1e-12 of one)
    are returned unchanged, which makes the projection exactly idempotent.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InvalidInputError(f"expected a 1-d vector, got shape {v.shape}")
    if v.size == 2:
        a, b = v[0], v[1]
        if not (np.isfinite(a) and np.isfinite(b)):
            raise InvalidInputError("cannot project a non-finite vector")
        if a >= 0.0 and b >= 0.0 and abs(a + b - 1.0) <= 1e-12:
            return v.copy()
        t = 0.5 * (a - b + 1.0)
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        return np.array([t, 1.0 - t])
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("cannot project a non-finite vector")
    if np.min(v) >= 0.0 and abs(float(np.sum(v)) - 1.0) <= 1e-12:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    above = u - (css - 1.0) / j > 0.0
    rho = int(np.nonzero(above)[0][-1])
    tau = (css[rho] - 1.0) / (rho + 1.0)
    w = np.maximum(v - tau, 0.0)
    # large-magnitude inputs can lose the unit sum to cancellation
    s = float(np.sum(w))
    if abs(s - 1.0) > 1e-12:
        w /= s
    return w


def project_ball(y, radius: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto the centered ball of given radius."""
    if radius < 0:
        raise InvalidInputError(f"ball radius must be nonnegative, got {radius}")
    y = np.asarray(y, dtype=np.float64)
    nrm2 = float(y @ y)
    if nrm2 <= radius * radius:
        return y.copy()
    out = y * (radius / np.sqrt(nrm2))
    n2 = float(out @ out)
    if n2 > radius * radius:  # one more pass removes the rounding overshoot
        out *= radius / np.sqrt(n2)
    return out


def matvec(J, w) -> np.ndarray:
    """Weighted sum of Jacobian columns, ``sum_m w_m * J[:, m]``."""
    J = np.asarray(J, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if J.ndim != 2 or w.ndim != 1 or J.shape[1] != w.size:
        raise InvalidInputError(
            f"dimension mismatch: Jacobian {J.shape} versus weights {w.shape}"
        )
    return J @ w


class RngStream:
    """Counter-based random stream with reproducible substreams.

    Backed by the Philox-4x64-10 counter-based generator (numpy
    implementation) with key ``(seed, stream)``. Equal (seed, stream) pairs
    produce identical sample sequences on every platform and run. Substreams
    derived with distinct tags are statistically independent; allocate tags
    through :meth:`substream` and never share one stream across threads.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=[self.seed, self.stream]))

    def substream(self, tag: int) -> "RngStream":
        """Independent stream keyed by (seed, tag). Tags must be unique per role."""
        return RngStream(self.seed, tag)

    def normal(self, shape=None, scale: float = 1.0) -> np.ndarray:
        out = self._gen.standard_normal(shape)
        return out if scale == 1.0 else out * scale

    def uniform(self, low: float = 0.0, high: float = 1.0, shape=None):
        return self._gen.uniform(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, shape=None):
        return self._gen.integers(low, high, shape)
