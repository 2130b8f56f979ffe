"""Iterative multi-objective methods driving a common step interface.

Implements deterministic multiple-gradient descent, its naive stochastic
counterpart, the tracking-corrected stochastic method (single-level and
nested), and the gradient-surgery baselines. ``run`` executes any of them
for K iterations and records exact-gradient diagnostics along the way.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .core import InvalidInputError, RngStream, project_ball
from .metrics import tracking_error
from .oracles import (NO_NOISE, InnerState, NestedOracleConfig, NoiseModel,
                      OracleStreams, nested_gradient_estimate, sample_jacobian)
from .subproblem import (lambda_step_regularized, lambda_step_softmax,
                         solve_lambda, solve_lambda_closed_form_2)

DIVERGENCE_NORM = 1e8

_PRESET_EXPONENTS = {
    # (alpha, beta, gamma, rho) exponents of K for the constant-in-k presets
    "theorem1": (-0.9, -0.5, -0.4, -0.2),
    "theorem2": (-0.6, -0.4, -1.0, None),
    "theorem3": (-0.5, -0.5, -0.75, None),
}

_TABLE7 = {
    "cityscapes": dict(kind="inv_sqrt", alpha0=1e-4, beta0=0.05, gamma0=0.1, rho0=0.0),
    "nyu-v2": dict(kind="constant", alpha0=1e-4, beta0=0.99, gamma0=0.1, rho0=0.0),
    "office-31": dict(kind="inv_sqrt", alpha0=1e-4, beta0=0.5, gamma0=0.1, rho0=0.0),
    "office-home": dict(kind="inv_sqrt", alpha0=1e-4, beta0=0.5, gamma0=0.1, rho0=0.0),
    "mt10": dict(kind="constant", alpha0=3e-4, beta0=0.99, gamma0=10.0, rho0=0.0),
}

SCHEDULE_PRESETS = ("toy", "constant", "theorem1", "theorem2", "theorem3") + tuple(
    "table7-" + name for name in _TABLE7
)


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes alpha_k (x), beta_k (tracking), gamma_k (weights) and rho.

    Kinds:

    * ``theorem1/2/3``: powers of the horizon K, constant in k. Exponents are
      (-9/10, -1/2, -2/5, -1/5), (-3/5, -2/5, -1, 0) and
      (-1/2, -1/2, -3/4, 0) respectively; the prefactors are free constants.
    * ``toy``: alpha_k = alpha0 * exp(-lr_decay * k / decay_unit),
      beta_k = beta0 / sqrt(k), gamma_k = gamma0 / sqrt(k).
    * ``inv_sqrt``: constant alpha, beta_k = beta0 / sqrt(k),
      gamma_k = gamma0 / sqrt(k).
    * ``constant``: all four values fixed.

    Named presets: the three theorem schedules, ``toy``, and
    ``table7-<experiment>`` recording the published per-experiment constants.
    """

    kind: str
    K: int
    alpha0: float = 1.0
    beta0: float = 1.0
    gamma0: float = 1.0
    rho0: float = 0.0
    lr_decay: float = 0.05
    decay_unit: float = 1000.0

    @classmethod
    def preset(cls, name: str, K: int, **overrides) -> "StepSchedule":
        if name in _PRESET_EXPONENTS:
            return cls(kind=name, K=K, **overrides)
        if name == "toy":
            base = dict(alpha0=0.001, beta0=5.0, gamma0=10.0, rho0=0.0)
            base.update(overrides)
            return cls(kind="toy", K=K, **base)
        if name == "constant":
            return cls(kind="constant", K=K, **overrides)
        if name.startswith("table7-"):
            base = dict(_TABLE7[name[len("table7-"):]])
            kind = base.pop("kind")
            base.update(overrides)
            return cls(kind=kind, K=K, **base)
        raise InvalidInputError(f"unknown schedule preset: {name!r}")

    def _theorem_value(self, which: int) -> float:
        exps = _PRESET_EXPONENTS[self.kind]
        pre = (self.alpha0, self.beta0, self.gamma0, self.rho0)[which]
        e = exps[which]
        if e is None:
            return 0.0
        return pre * self.K ** e

    def alpha(self, k: int) -> float:
        if self.kind in _PRESET_EXPONENTS:
            return self._theorem_value(0)
        if self.kind == "toy":
            return self.alpha0 * np.exp(-self.lr_decay * k / self.decay_unit)
        return self.alpha0

    def beta(self, k: int) -> float:
        if self.kind in _PRESET_EXPONENTS:
            return self._theorem_value(1)
        if self.kind in ("toy", "inv_sqrt"):
            return self.beta0 / np.sqrt(k)
        return self.beta0

    def gamma(self, k: int) -> float:
        if self.kind in _PRESET_EXPONENTS:
            return self._theorem_value(2)
        if self.kind in ("toy", "inv_sqrt"):
            return self.gamma0 / np.sqrt(k)
        return self.gamma0

    def rho(self) -> float:
        if self.kind in _PRESET_EXPONENTS:
            return self._theorem_value(3)
        return self.rho0


@dataclass
class MoCoState:
    """Iterate, tracking matrix, weights and bookkeeping of the corrected method."""

    x: np.ndarray
    Y: np.ndarray          # (d, M) tracking columns
    lam: np.ndarray        # simplex weights
    k: int                 # completed iterations
    caps: np.ndarray       # (M,) per-objective tracking-norm caps
    inner: InnerState | None = None


@dataclass
class TrajectoryRecord:
    """Per-iteration diagnostics of one run, all from exact gradients."""

    method: str
    seed: int
    ks: np.ndarray
    F: np.ndarray                 # (n, M) objective values
    stationarity_sq: np.ndarray   # min-norm combination, squared norm
    tracking_err: np.ndarray      # ||Y - grad F||_F (0 for untracked methods)
    direction_err_sq: np.ndarray  # ||d(x) - Y lam||^2 (0 for untracked methods)
    lams: np.ndarray              # (n, M) most recent weights of the method
    diverged: bool = False
    xs: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.F.shape[1]

    def mean_stationarity(self) -> float:
        return float(np.mean(self.stationarity_sq))

    def mean_direction_err(self) -> float:
        return float(np.mean(self.direction_err_sq))


# ---------------------------------------------------------------------------
# single steps


def mgda_step(x, problem, alpha: float, tol: float = 1e-8, lambda0=None) -> np.ndarray:
    """Deterministic multiple-gradient step with exact gradients."""
    d, _ = mgda_direction(problem, x, tol=tol, lambda0=lambda0)
    return np.asarray(x, dtype=np.float64) - alpha * d


def mgda_direction(problem, x, tol: float = 1e-8, lambda0=None):
    J = problem.jacobian(x)
    rep = solve_lambda(J, 0.0, tol=tol, lambda0=lambda0)
    return J @ rep.weights, rep.weights


def smg_step(x, problem, alpha: float, noise: NoiseModel, rng: RngStream) -> np.ndarray:
    """Naive stochastic multi-gradient step: weights solved on the sample."""
    d, _ = smg_direction(problem, x, noise, rng)
    return np.asarray(x, dtype=np.float64) - alpha * d


def smg_direction(problem, x, noise: NoiseModel, rng: RngStream):
    Js = sample_jacobian(problem, x, noise, rng)
    if Js.shape[1] == 2:
        w0 = solve_lambda_closed_form_2(Js[:, 0], Js[:, 1])
        w = np.array([w0, 1.0 - w0])
    else:
        w = solve_lambda(Js, 0.0).weights
    return Js @ w, w


def moco_step(state: MoCoState, problem, schedule: StepSchedule, streams: OracleStreams,
              noise: NoiseModel = NO_NOISE, nested: NestedOracleConfig | None = None,
              lambda_projection: str = "euclidean", lagged_updates: bool = False,
              lambda_mode: str = "step") -> MoCoState:
    """One iteration of the tracking-corrected method.

    In order: sample the per-objective gradient estimates h (directly or
    through the nested estimator), update the ball-projected tracking columns,
    take one weight step, and move x along the combined direction.

    ``lagged_updates=True`` reproduces the recursion literally as written:
    both the weight step and the x update read the pre-update ``Y_k`` and the
    x update uses the pre-update weights. The default uses the freshest
    values. ``lambda_mode="exact"`` replaces the incremental weight step with
    a full subproblem solve (diagnostic mode).
    """
    k_next = state.k + 1
    alpha = schedule.alpha(k_next)
    beta = schedule.beta(k_next)
    gamma = schedule.gamma(k_next)
    rho = schedule.rho()

    inner = state.inner
    if nested is not None:
        h, inner = nested_gradient_estimate(nested, inner, state.x, problem, streams,
                                            beta=beta)
    else:
        h = sample_jacobian(problem, state.x, noise, streams.outer)

    Y_new = np.empty_like(state.Y)
    for m in range(state.Y.shape[1]):
        y = state.Y[:, m] - beta * (state.Y[:, m] - h[:, m])
        Y_new[:, m] = project_ball(y, state.caps[m])

    Y_for_lambda = state.Y if lagged_updates else Y_new
    if lambda_mode == "exact":
        lam_new = solve_lambda(Y_for_lambda, rho, tol=1e-10, lambda0=state.lam).weights
    elif lambda_projection == "softmax":
        lam_new = lambda_step_softmax(state.lam, Y_for_lambda, rho, gamma)
    else:
        lam_new = lambda_step_regularized(state.lam, Y_for_lambda, rho, gamma)

    if lagged_updates:
        direction = state.Y @ state.lam
    else:
        direction = Y_new @ lam_new
    x_new = state.x - alpha * direction

    return MoCoState(x=x_new, Y=Y_new, lam=lam_new, k=k_next, caps=state.caps, inner=inner)


def pcgrad_direction(grads: np.ndarray, rng: RngStream) -> np.ndarray:
    """Project each gradient onto the normal plane of conflicting ones, then average.

    Conflicts are visited in a fresh random task order per gradient; the
    projection target is always the original sampled gradient of the other
    task.
    """
    d, M = grads.shape
    out = np.zeros(d)
    for i in range(M):
        g = grads[:, i].copy()
        for j in rng.permutation(M):
            if j == i:
                continue
            gj = grads[:, j]
            dot = float(g @ gj)
            if dot < 0.0:
                nrm2 = float(gj @ gj)
                if nrm2 > 0.0:
                    g -= (dot / nrm2) * gj
        out += g
    return out / M


def pcgrad_step(x, problem, alpha: float, noise: NoiseModel, rng: RngStream) -> np.ndarray:
    Js = sample_jacobian(problem, x, noise, rng)
    return np.asarray(x, dtype=np.float64) - alpha * pcgrad_direction(Js, rng)


def cagrad_weights(J: np.ndarray, c_param: float) -> np.ndarray:
    """Simplex weights of the conflict-averse dual problem.

    Minimizes ``w' G u + c ||g0|| sqrt(w' G w)`` over the simplex, where
    ``G = J'J``, ``u`` is uniform and ``g0 = J u`` is the average gradient.
    """
    if c_param < 0:
        raise InvalidInputError(f"c_param must be nonnegative, got {c_param}")
    M = J.shape[1]
    G = J.T @ J
    u = np.full(M, 1.0 / M)
    g0_norm = float(np.sqrt(max(u @ G @ u, 0.0)))
    a = c_param * g0_norm
    Gu = G @ u

    def objective(w):
        quad = float(max(w @ G @ w, 0.0))
        return float(w @ Gu) + a * np.sqrt(quad + 1e-18)

    res = scipy.optimize.minimize(
        objective, u, bounds=[(0.0, 1.0)] * M,
        constraints={"type": "eq", "fun": lambda w: float(np.sum(w)) - 1.0},
        method="SLSQP", options={"ftol": 1e-14, "maxiter": 200},
    )
    w = np.clip(res.x, 0.0, None)
    return w / np.sum(w)


def cagrad_direction(J: np.ndarray, c_param: float) -> np.ndarray:
    g0 = np.mean(J, axis=1)
    if c_param == 0.0:
        return g0
    w = cagrad_weights(J, c_param)
    gw = J @ w
    gw_norm = float(np.linalg.norm(gw))
    if gw_norm == 0.0:
        return g0
    a = c_param * float(np.linalg.norm(g0))
    return g0 + (a / gw_norm) * gw


def cagrad_step(x, problem, alpha: float, c_param: float, noise: NoiseModel,
                rng: RngStream) -> np.ndarray:
    Js = sample_jacobian(problem, x, noise, rng)
    return np.asarray(x, dtype=np.float64) - alpha * cagrad_direction(Js, c_param)


# ---------------------------------------------------------------------------
# run loop

METHODS = ("mgda", "smg", "smg-growing", "moco", "moco-nested", "pcgrad", "cagrad")


class MethodDriver:
    """Steps one method along its own trajectory, exposing state for diagnostics.

    Owns the run's random substreams. ``direction_sample`` draws the
    direction the method would compute from one fresh set of gradient
    samples at the current iterate, using an independent diagnostic stream,
    so probing never perturbs the trajectory.
    """

    def __init__(self, method: str, problem, schedule: StepSchedule, seed: int,
                 noise: NoiseModel = NO_NOISE, x0=None, caps=None,
                 nested: NestedOracleConfig | None = None,
                 lambda_projection: str = "euclidean", lagged_updates: bool = False,
                 lambda_mode: str = "step", cagrad_c: float = 0.5,
                 batch_growth_every: int = 10000):
        if method not in METHODS:
            raise InvalidInputError(f"unknown method: {method!r}")
        if method == "moco-nested" and nested is None:
            raise InvalidInputError("moco-nested requires a NestedOracleConfig")
        self.method = method
        self.problem = problem
        self.schedule = schedule
        self.seed = seed
        self.base_noise = noise
        self.nested = nested if method == "moco-nested" else None
        self.lambda_projection = lambda_projection
        self.lagged_updates = lagged_updates
        self.lambda_mode = lambda_mode
        self.cagrad_c = cagrad_c
        self.batch_growth_every = batch_growth_every

        master = RngStream(seed)
        self.streams = OracleStreams(master, problem.M)
        self.x = np.zeros(problem.d) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
        self.k = 0
        self._warm = None  # warm start for the diagnostic subproblem solve

        if method in ("moco", "moco-nested"):
            if caps is None:
                caps_arr = np.full(problem.M, 1e3)
            else:
                caps_arr = np.broadcast_to(np.asarray(caps, dtype=np.float64),
                                           (problem.M,)).copy()
            inner = None
            if self.nested is not None:
                inner = InnerState.zeros(problem.M, problem.d)
                Y0, inner = nested_gradient_estimate(self.nested, inner, self.x,
                                                     problem, self.streams,
                                                     beta=schedule.beta(1))
            else:
                Y0 = sample_jacobian(problem, self.x, noise, self.streams.outer)
            Y0 = np.column_stack([project_ball(Y0[:, m], caps_arr[m])
                                  for m in range(problem.M)])
            self.state = MoCoState(x=self.x, Y=Y0, lam=np.full(problem.M, 1.0 / problem.M),
                                   k=0, caps=caps_arr, inner=inner)
        else:
            self.state = None
        self.weights = np.full(problem.M, 1.0 / problem.M)

    def noise_at(self, k: int) -> NoiseModel:
        """Noise model in effect at iteration k (grows the batch if configured)."""
        if self.method == "smg-growing" and self.base_noise.kind == "gaussian":
            extra = k // self.batch_growth_every if self.batch_growth_every > 0 else 0
            if extra > 0:
                return dataclasses.replace(self.base_noise,
                                           batch_size=self.base_noise.batch_size + extra)
        return self.base_noise

    def samples_per_step(self, k: int) -> int:
        return self.noise_at(k).batch_size

    def step(self):
        k_next = self.k + 1
        if self.method == "mgda":
            J = self.problem.jacobian(self.x)
            rep = solve_lambda(J, 0.0, lambda0=self.weights)
            self.weights = rep.weights
            self.x = self.x - self.schedule.alpha(k_next) * (J @ rep.weights)
        elif self.method in ("smg", "smg-growing"):
            d, w = smg_direction(self.problem, self.x, self.noise_at(k_next),
                                 self.streams.outer)
            self.weights = w
            self.x = self.x - self.schedule.alpha(k_next) * d
        elif self.method == "pcgrad":
            self.x = pcgrad_step(self.x, self.problem, self.schedule.alpha(k_next),
                                 self.base_noise, self.streams.outer)
        elif self.method == "cagrad":
            Js = sample_jacobian(self.problem, self.x, self.base_noise, self.streams.outer)
            if self.cagrad_c > 0:
                self.weights = cagrad_weights(Js, self.cagrad_c)
            self.x = self.x - self.schedule.alpha(k_next) * cagrad_direction(Js, self.cagrad_c)
        else:
            self.state = moco_step(self.state, self.problem, self.schedule, self.streams,
                                   noise=self.base_noise, nested=self.nested,
                                   lambda_projection=self.lambda_projection,
                                   lagged_updates=self.lagged_updates,
                                   lambda_mode=self.lambda_mode)
            self.x = self.state.x
            self.weights = self.state.lam
        self.k = k_next

    # -- diagnostics ------------------------------------------------------

    def direction_sample(self, x, rng: RngStream) -> np.ndarray:
        """Direction from one fresh set of gradient samples at the current state."""
        if self.method == "mgda":
            d, _ = mgda_direction(self.problem, x)
            return d
        if self.method in ("smg", "smg-growing"):
            d, _ = smg_direction(self.problem, x, self.noise_at(max(self.k, 1)), rng)
            return d
        if self.method in ("moco", "moco-nested"):
            st = self.state
            k_next = st.k + 1
            beta = self.schedule.beta(k_next)
            gamma = self.schedule.gamma(k_next)
            rho = self.schedule.rho()
            if self.nested is not None:
                h, _ = nested_gradient_estimate(
                    self.nested, st.inner, x, self.problem,
                    _DiagStreams(rng, self.problem.M), beta=beta)
            else:
                h = sample_jacobian(self.problem, x, self.base_noise, rng)
            Y_new = np.column_stack([
                project_ball(st.Y[:, m] - beta * (st.Y[:, m] - h[:, m]), st.caps[m])
                for m in range(self.problem.M)])
            Y_for_lambda = st.Y if self.lagged_updates else Y_new
            if self.lambda_projection == "softmax":
                lam = lambda_step_softmax(st.lam, Y_for_lambda, rho, gamma)
            else:
                lam = lambda_step_regularized(st.lam, Y_for_lambda, rho, gamma)
            return Y_new @ lam
        raise InvalidInputError(f"method {self.method!r} does not define a sampled direction")

    def diagnostics(self):
        """Exact-gradient diagnostics at the current iterate."""
        F, J = self.problem.value_and_jacobian(self.x)
        rep = solve_lambda(J, 0.0, tol=1e-10, lambda0=self._warm)
        self._warm = rep.weights
        stat_sq = rep.objective_value
        if self.state is not None:
            track = tracking_error(self.state.Y, J)
            dir_err = float(np.sum((J @ rep.weights - self.state.Y @ self.state.lam) ** 2))
        else:
            track = 0.0
            dir_err = 0.0
        return F, stat_sq, track, dir_err


class _DiagStreams:
    """Oracle stream bundle where every role draws from one diagnostic stream."""

    def __init__(self, rng: RngStream, M: int):
        self.outer = rng
        self.diag = rng
        self.inner = [rng] * M
        self.hess = [rng] * M


def run(method: str, problem, schedule: StepSchedule, K: int, seed: int,
        record_every: int = 100, noise: NoiseModel = NO_NOISE, x0=None, caps=None,
        nested: NestedOracleConfig | None = None, lambda_projection: str = "euclidean",
        lagged_updates: bool = False, lambda_mode: str = "step", cagrad_c: float = 0.5,
        batch_growth_every: int = 10000, record_x: bool = False) -> TrajectoryRecord:
    """Execute K iterations of a method and record diagnostics.

    Diagnostics (objective values, stationarity, tracking and direction
    errors) always use exact problem gradients, also for stochastic methods.
    Rows are recorded at k=0, every ``record_every`` iterations, and at k=K.
    Non-finite iterates or ``||x|| > 1e8`` abort the run and return the
    partial record flagged as diverged.
    """
    if K < 1:
        raise InvalidInputError(f"K must be >= 1, got {K}")
    if record_every < 1:
        raise InvalidInputError(f"record_every must be >= 1, got {record_every}")
    driver = MethodDriver(method, problem, schedule, seed, noise=noise, x0=x0, caps=caps,
                          nested=nested, lambda_projection=lambda_projection,
                          lagged_updates=lagged_updates, lambda_mode=lambda_mode,
                          cagrad_c=cagrad_c, batch_growth_every=batch_growth_every)

    rows_k, rows_F, rows_stat, rows_track, rows_dir, rows_lam, rows_x = \
        [], [], [], [], [], [], []
    diverged = False

    def record():
        F, stat_sq, track, dir_err = driver.diagnostics()
        rows_k.append(driver.k)
        rows_F.append(F)
        rows_stat.append(stat_sq)
        rows_track.append(track)
        rows_dir.append(dir_err)
        rows_lam.append(driver.weights.copy())
        if record_x:
            rows_x.append(driver.x.copy())

    record()
    for k in range(1, K + 1):
        driver.step()
        if not np.all(np.isfinite(driver.x)) or np.linalg.norm(driver.x) > DIVERGENCE_NORM:
            diverged = True
            break
        if k % record_every == 0 or k == K:
            record()

    return TrajectoryRecord(
        method=method, seed=seed,
        ks=np.asarray(rows_k, dtype=np.int64),
        F=np.asarray(rows_F),
        stationarity_sq=np.asarray(rows_stat),
        tracking_err=np.asarray(rows_track),
        direction_err_sq=np.asarray(rows_dir),
        lams=np.asarray(rows_lam),
        diverged=diverged,
        xs=np.asarray(rows_x) if record_x else None,
        meta={"K": K, "record_every": record_every, "schedule": schedule.kind},
    )
