"""Named experiment presets.

Each preset is a complete config text; ``moco run preset:<name>`` executes it
directly. The toy presets follow the published protocol: two-objective toy
problem, 70000 iterations, initial learning rate 0.001 (trajectory figures)
or 0.0025 (objective-space figures and the bias protocol) with exponential
decay at rate 0.05, tracking step 5/sqrt(k), and for the stochastic methods
zero-mean Gaussian gradient noise.
"""

from __future__ import annotations

_FIG1_STARTS = "(-8.5, 7.5); (-8.5, 5); (10, -8)"
_FIG3_STARTS = "(-8.5, 7.5); (-8.5, 5); (10, -8); (0, 0); (9, 9)"
_TOY_SIGMA = "1.5"
_TOY_GAMMA = "10.0"
_TOY_DECAY_UNIT = "10000.0"


def _toy_preset(method: str, starts: str, alpha0: str, noisy: bool, extra: str = "") -> str:
    noise = f"noise = gaussian\nsigma = {_TOY_SIGMA}\n" if noisy else "noise = none\n"
    return (
        "problem = toy\n"
        f"method = {method}\n"
        "K = 70000\n"
        "schedule = toy\n"
        f"alpha0 = {alpha0}\n"
        "beta0 = 5.0\n"
        f"gamma0 = {_TOY_GAMMA}\n"
        "lr_decay = 0.05\n"
        f"decay_unit = {_TOY_DECAY_UNIT}\n"
        f"starts = {starts}\n"
        "lagged_updates = true\n"
        "record_every = 500\n"
        + noise + extra
    )


PRESETS = {
    # trajectory comparison: three initializations, lr 0.001
    "fig1-mgda": _toy_preset("mgda", _FIG1_STARTS, "0.001", noisy=False,
                             extra="out_dir = out/fig1-mgda\n"),
    "fig1-smg": _toy_preset("smg", _FIG1_STARTS, "0.001", noisy=True,
                            extra="out_dir = out/fig1-smg\n"),
    "fig1-moco": _toy_preset("moco", _FIG1_STARTS, "0.001", noisy=True,
                             extra="out_dir = out/fig1-moco\n"),
    "fig1-pcgrad": _toy_preset("pcgrad", _FIG1_STARTS, "0.001", noisy=True,
                               extra="out_dir = out/fig1-pcgrad\n"),
    "fig1-cagrad": _toy_preset("cagrad", _FIG1_STARTS, "0.001", noisy=True,
                               extra="out_dir = out/fig1-cagrad\ncagrad_c = 0.5\n"),

    # objective-space comparison: five initializations, lr 0.0025
    "fig3-mgda": _toy_preset("mgda", _FIG3_STARTS, "0.0025", noisy=False,
                             extra="out_dir = out/fig3-mgda\n"),
    "fig3-smg": _toy_preset("smg", _FIG3_STARTS, "0.0025", noisy=True,
                            extra="out_dir = out/fig3-smg\n"),
    "fig3-moco": _toy_preset("moco", _FIG3_STARTS, "0.0025", noisy=True,
                             extra="out_dir = out/fig3-moco\n"),

    # multi-gradient bias along the three trajectories, lr 0.0025
    "bias-smg": _toy_preset("smg", _FIG1_STARTS, "0.001", noisy=True,
                            extra="out_dir = out/bias-smg\nbias_every = 500\nbias_sets = 10\n"),
    "bias-smg-growing": _toy_preset(
        "smg-growing", _FIG1_STARTS, "0.001", noisy=True,
        extra="out_dir = out/bias-smg-growing\nbias_every = 500\nbias_sets = 10\n"
              "batch_growth_every = 10000\n"),
    "bias-moco": _toy_preset("moco", _FIG1_STARTS, "0.001", noisy=True,
                             extra="out_dir = out/bias-moco\nbias_every = 500\nbias_sets = 10\n"),

    # direction-convergence trend on a noisy quadratic family
    "lemma3-quadratic": (
        "problem = quadratic\n"
        "dim = 10\n"
        "objectives = 3\n"
        "mu = 0.5\n"
        "lipschitz = 2.0\n"
        "instance_seed = 0\n"
        "method = moco\n"
        "schedule = theorem1\n"
        "alpha0 = 1.0\n"
        "beta0 = 1.0\n"
        "gamma0 = 1.0\n"
        "rho0 = 1.0\n"
        "K = 100000\n"
        "seeds = 1, 2, 3, 4, 5\n"
        "record_every = 100\n"
        "noise = gaussian\n"
        "sigma = 1.0\n"
        "caps = 50.0\n"
        "out_dir = out/lemma3\n"
    ),

    # stationarity rate over a K sweep
    "theorem3-rate": (
        "problem = quadratic\n"
        "dim = 10\n"
        "objectives = 3\n"
        "mu = 0.5\n"
        "lipschitz = 2.0\n"
        "instance_seed = 0\n"
        "method = moco\n"
        "schedule = theorem3\n"
        "alpha0 = 1.0\n"
        "beta0 = 1.0\n"
        "gamma0 = 1.0\n"
        "K = 1000\n"
        "seeds = 1, 2, 3, 4, 5\n"
        "record_every = 10\n"
        "noise = gaussian\n"
        "sigma = 1.0\n"
        "caps = 50.0\n"
        "out_dir = out/theorem3\n"
    ),

    # nested estimator bias, single-timescale inner update (T = 1)
    "lemma1-nested": (
        "problem = bilevel\n"
        "dim = 5\n"
        "objectives = 2\n"
        "instance_seed = 0\n"
        "method = moco-nested\n"
        "schedule = theorem1\n"
        "alpha0 = 1.0\n"
        "beta0 = 1.0\n"
        "gamma0 = 1.0\n"
        "rho0 = 1.0\n"
        "K = 1000\n"
        "seeds = 1, 2, 3\n"
        "record_every = 10\n"
        "noise = gaussian\n"
        "sigma = 0.5\n"
        "inner_steps = 1\n"
        "inner_schedule = beta\n"
        "hessian = neumann\n"
        "neumann_depth = 20\n"
        "neumann_scale = 0.5\n"
        "caps = 100.0\n"
        "out_dir = out/lemma1\n"
    ),

    # nested estimator bias, multi-step inner loop (T = ceil(1/beta))
    "lemma2-nested": (
        "problem = bilevel\n"
        "dim = 5\n"
        "objectives = 2\n"
        "instance_seed = 0\n"
        "method = moco-nested\n"
        "schedule = constant\n"
        "alpha0 = 0.01\n"
        "beta0 = 0.1\n"
        "gamma0 = 0.05\n"
        "K = 2000\n"
        "seeds = 1, 2, 3\n"
        "record_every = 10\n"
        "noise = gaussian\n"
        "sigma = 0.5\n"
        "inner_steps = 10\n"
        "inner_schedule = robbins_monro\n"
        "inner_mu = 1.0\n"
        "hessian = neumann\n"
        "neumann_depth = 20\n"
        "neumann_scale = 0.5\n"
        "caps = 100.0\n"
        "out_dir = out/lemma2\n"
    ),
}

PRESET_NOTES = {
    "fig1-mgda": "toy trajectories, 3 starts, exact gradients",
    "fig1-smg": "toy trajectories, 3 starts, noisy naive multi-gradient",
    "fig1-moco": "toy trajectories, 3 starts, noisy corrected method",
    "fig1-pcgrad": "toy trajectories, 3 starts, noisy gradient surgery baseline",
    "fig1-cagrad": "toy trajectories, 3 starts, noisy conflict-averse baseline",
    "fig3-mgda": "objective-space runs, 5 starts, lr 0.0025",
    "fig3-smg": "objective-space runs, 5 starts, lr 0.0025",
    "fig3-moco": "objective-space runs, 5 starts, lr 0.0025",
    "bias-smg": "bias protocol along 3 toy trajectories",
    "bias-smg-growing": "bias protocol, batch grows by 1 every 10000 iterations",
    "bias-moco": "bias protocol along 3 toy trajectories",
    "lemma3-quadratic": "direction-error trend, noisy 10-d 3-objective quadratic",
    "theorem3-rate": "stationarity rate base config for a K sweep",
    "lemma1-nested": "nested-estimator bias, T=1 single-timescale",
    "lemma2-nested": "nested-estimator bias, multi-step inner loop",
}


def preset_config(name: str) -> str:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; see 'moco presets list'")
    return PRESETS[name]
