"""Flat key-value experiment configuration.

A config is plain text, one ``key = value`` assignment per line, ``#`` for
comments. The full schema is documented in the README; every key not listed
there is rejected, and validation reports all problems at once rather than
stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..oracles import NestedOracleConfig, NoiseModel
from ..problems import BilevelMOO, QuadraticMOO, ToyProblem
from ..solvers import METHODS, SCHEDULE_PRESETS, StepSchedule

PROBLEMS = ("toy", "quadratic", "bilevel")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every violation."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# key -> (type tag, default). None defaults mean "unset, fall back to the
# schedule preset or problem defaults".
SCHEMA = {
    "problem": ("str", None),
    "toy_variant": ("str", "corrected"),
    "dim": ("int", 2),
    "objectives": ("int", 2),
    "mu": ("float", 0.5),
    "lipschitz": ("float", 2.0),
    "instance_seed": ("int", 0),
    "center_scale": ("float", 1.0),

    "method": ("str", None),
    "cagrad_c": ("float", 0.5),
    "lambda_projection": ("str", "euclidean"),
    "lagged_updates": ("bool", False),
    "caps": ("float", 1000.0),
    "batch_growth_every": ("int", 10000),

    "schedule": ("str", "toy"),
    "alpha0": ("float", None),
    "beta0": ("float", None),
    "gamma0": ("float", None),
    "rho0": ("float", None),
    "lr_decay": ("float", 0.05),
    "decay_unit": ("float", 1000.0),

    "K": ("int", None),
    "seeds": ("int_list", (1,)),
    "record_every": ("int", 100),
    "out_dir": ("str", "out"),
    "starts": ("vector_list", None),
    "record_x": ("bool", False),

    "noise": ("str", "none"),
    "sigma": ("float", 0.0),
    "batch_size": ("int", 1),

    "inner_steps": ("int", 1),
    "inner_schedule": ("str", "constant"),
    "inner_eta": ("float", 0.01),
    "inner_mu": ("float", 1.0),
    "hessian": ("str", "neumann"),
    "neumann_depth": ("int", 20),
    "neumann_scale": ("float", 0.5),

    "bias_sets": ("int", 10),
    "bias_every": ("int", 500),
}

REQUIRED = ("problem", "method", "K")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    method: str
    K: int
    toy_variant: str = "corrected"
    dim: int = 2
    objectives: int = 2
    mu: float = 0.5
    lipschitz: float = 2.0
    instance_seed: int = 0
    center_scale: float = 1.0
    cagrad_c: float = 0.5
    lambda_projection: str = "euclidean"
    lagged_updates: bool = False
    caps: float = 1000.0
    batch_growth_every: int = 10000
    schedule: str = "toy"
    alpha0: float | None = None
    beta0: float | None = None
    gamma0: float | None = None
    rho0: float | None = None
    lr_decay: float = 0.05
    decay_unit: float = 1000.0
    seeds: tuple = (1,)
    record_every: int = 100
    out_dir: str = "out"
    starts: tuple | None = None
    record_x: bool = False
    noise: str = "none"
    sigma: float = 0.0
    batch_size: int = 1
    inner_steps: int = 1
    inner_schedule: str = "constant"
    inner_eta: float = 0.01
    inner_mu: float = 1.0
    hessian: str = "neumann"
    neumann_depth: int = 20
    neumann_scale: float = 0.5
    bias_sets: int = 10
    bias_every: int = 500


def _parse_value(key, tag, text, errors):
    text = text.strip()
    try:
        if tag == "int":
            return int(text)
        if tag == "float":
            return float(text)
        if tag == "bool":
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(text)
        if tag == "str":
            return text
        if tag == "int_list":
            return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())
        if tag == "vector_list":
            groups = [g.strip().strip("()") for g in text.split(";") if g.strip()]
            return tuple(tuple(float(t) for t in g.split(",") if t.strip()) for g in groups)
    except ValueError:
        errors.append(f"key {key!r}: cannot parse {text!r} as {tag}")
        return None
    raise AssertionError(f"unhandled type tag {tag}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config; raises ConfigError listing every problem."""
    errors = []
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        tag, _ = SCHEMA[key]
        parsed = _parse_value(key, tag, val, errors)
        if parsed is not None:
            values[key] = parsed

    for key in REQUIRED:
        if key not in values:
            errors.append(f"missing required key {key!r}")

    cfg_kwargs = {}
    for key, (tag, default) in SCHEMA.items():
        cfg_kwargs[key] = values.get(key, default)
    if cfg_kwargs["K"] is None:
        cfg_kwargs["K"] = 0

    _validate(cfg_kwargs, errors)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**cfg_kwargs)


def _validate(v, errors):
    if v["problem"] is not None and v["problem"] not in PROBLEMS:
        errors.append(f"unknown problem {v['problem']!r}, expected one of {PROBLEMS}")
    if v["method"] is not None and v["method"] not in METHODS:
        errors.append(f"unknown method {v['method']!r}, expected one of {METHODS}")
    if v["schedule"] not in SCHEDULE_PRESETS:
        errors.append(f"unknown schedule {v['schedule']!r}, expected one of {SCHEDULE_PRESETS}")
    if v["K"] is not None and v["K"] < 1:
        errors.append("K must be >= 1")
    if not v["seeds"]:
        errors.append("seeds must be nonempty")
    if v["record_every"] < 1:
        errors.append("record_every must be >= 1")
    if v["toy_variant"] not in ("corrected", "literal"):
        errors.append(f"toy_variant must be 'corrected' or 'literal', got {v['toy_variant']!r}")
    if v["lambda_projection"] not in ("euclidean", "softmax"):
        errors.append("lambda_projection must be 'euclidean' or 'softmax'")
    if v["noise"] not in ("none", "gaussian"):
        errors.append(f"noise must be 'none' or 'gaussian', got {v['noise']!r}")
    if v["sigma"] < 0:
        errors.append("sigma must be nonnegative")
    if v["batch_size"] < 1:
        errors.append("batch_size must be >= 1")
    if v["dim"] < 1:
        errors.append("dim must be >= 1")
    if v["objectives"] < 1:
        errors.append("objectives must be >= 1")
    if v["inner_steps"] < 1:
        errors.append("inner_steps must be >= 1")
    if v["inner_schedule"] not in ("constant", "robbins_monro", "beta"):
        errors.append("inner_schedule must be 'constant', 'robbins_monro' or 'beta'")
    if v["hessian"] not in ("exact", "neumann"):
        errors.append("hessian must be 'exact' or 'neumann'")
    if v["bias_sets"] < 1:
        errors.append("bias_sets must be >= 1")
    if v["bias_every"] < 1:
        errors.append("bias_every must be >= 1")
    if v["starts"] is not None:
        if v["problem"] == "toy":
            want = 2
        else:
            want = v["dim"]
        for s in v["starts"]:
            if len(s) != want:
                errors.append(f"start point {s} has length {len(s)}, expected {want}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) equals c."""
    lines = []
    for key, (tag, default) in SCHEMA.items():
        val = getattr(cfg, key)
        if val is None:
            continue
        if tag == "int_list":
            text = ", ".join(str(s) for s in val)
        elif tag == "vector_list":
            text = "; ".join("(" + ", ".join(repr(float(c)) for c in s) + ")" for s in val)
        elif tag == "float":
            text = repr(float(val))
        elif tag == "bool":
            text = "true" if val else "false"
        else:
            text = str(val)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def make_problem(cfg: ExperimentConfig):
    if cfg.problem == "toy":
        return ToyProblem(corrected_r=(cfg.toy_variant == "corrected"))
    if cfg.problem == "quadratic":
        return QuadraticMOO.random(cfg.dim, cfg.objectives, mu=cfg.mu, L=cfg.lipschitz,
                                   seed=cfg.instance_seed, center_scale=cfg.center_scale)
    if cfg.problem == "bilevel":
        return BilevelMOO.random(cfg.dim, cfg.objectives, mu=cfg.mu, L=cfg.lipschitz,
                                 seed=cfg.instance_seed, target_scale=cfg.center_scale)
    raise ConfigError([f"unknown problem {cfg.problem!r}"])


def make_schedule(cfg: ExperimentConfig, K: int | None = None) -> StepSchedule:
    overrides = {}
    for key in ("alpha0", "beta0", "gamma0", "rho0"):
        val = getattr(cfg, key)
        if val is not None:
            overrides[key] = val
    if cfg.schedule == "toy":
        overrides["lr_decay"] = cfg.lr_decay
        overrides["decay_unit"] = cfg.decay_unit
    return StepSchedule.preset(cfg.schedule, K if K is not None else cfg.K, **overrides)


def make_noise(cfg: ExperimentConfig) -> NoiseModel:
    return NoiseModel(kind=cfg.noise, sigma=cfg.sigma, batch_size=cfg.batch_size)


def make_nested(cfg: ExperimentConfig) -> NestedOracleConfig:
    return NestedOracleConfig(
        inner_steps=cfg.inner_steps, inner_schedule=cfg.inner_schedule,
        inner_eta=cfg.inner_eta, inner_mu=cfg.inner_mu, hessian=cfg.hessian,
        neumann_depth=cfg.neumann_depth, neumann_scale=cfg.neumann_scale,
        noise=make_noise(cfg))


def default_starts(cfg: ExperimentConfig):
    if cfg.starts is not None:
        return [np.asarray(s, dtype=np.float64) for s in cfg.starts]
    d = 2 if cfg.problem == "toy" else cfg.dim
    return [np.zeros(d)]
