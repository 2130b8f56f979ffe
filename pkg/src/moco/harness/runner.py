"""Seeded batch execution, the bias-measurement protocol, and CSV emission.

All outputs are byte-deterministic functions of the config: runs are ordered
by (start index, seed index), numbers are rendered with 17 significant
digits, newlines are LF, and run metadata contains no timestamps.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import subprocess
from dataclasses import dataclass, replace

import numpy as np

from .. import __version__
from ..core import RngStream
from ..metrics import BiasReport, direction_bias
from ..oracles import STREAM_DIAG
from ..solvers import MethodDriver, TrajectoryRecord, run
from .config import (ExperimentConfig, default_starts, make_nested, make_noise,
                     make_problem, make_schedule, serialize_config)

FMT = "%.17g"


def _fmt(x: float) -> str:
    return FMT % x


def emit_csv(record: TrajectoryRecord, path) -> None:
    """Write a trajectory record as CSV with the fixed column contract."""
    M = record.M if record.ks.size else record.lams.shape[1] if record.lams.size else 0
    header = (["k"] + [f"f_{m + 1}" for m in range(M)]
              + ["stationarity_sq", "tracking_err", "direction_err_sq"]
              + [f"lambda_{m + 1}" for m in range(M)])
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(record.ks.size):
                row = [str(int(record.ks[i]))]
                row += [_fmt(v) for v in record.F[i]]
                row += [_fmt(record.stationarity_sq[i]), _fmt(record.tracking_err[i]),
                        _fmt(record.direction_err_sq[i])]
                row += [_fmt(v) for v in record.lams[i]]
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def parse_csv(path) -> dict:
    """Read an emitted CSV back into column arrays keyed by header name."""
    with open(path, "r", newline="\n") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(r[j]) for r in rows]) for j, name in enumerate(header)}
    if "k" in cols:
        cols["k"] = cols["k"].astype(np.int64)
    return cols


def _bias_csv(report: BiasReport, path) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("k,samples_cum,bias_norm,bias_sq\n")
            for k, s, b, b2 in zip(report.ks, report.samples_used, report.bias,
                                   report.bias_sq):
                fh.write(f"{k},{s},{_fmt(b)},{_fmt(b2)}\n")
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return "unknown"


def effective_seeds(cfg: ExperimentConfig) -> tuple:
    """Config seeds, unless MOCO_SEED_OVERRIDE pins a single seed."""
    override = os.environ.get("MOCO_SEED_OVERRIDE")
    if override is not None:
        return (int(override),)
    return tuple(cfg.seeds)


def _run_one(cfg: ExperimentConfig, x0, seed: int) -> TrajectoryRecord:
    problem = make_problem(cfg)
    schedule = make_schedule(cfg)
    nested = make_nested(cfg) if cfg.method == "moco-nested" else None
    return run(cfg.method, problem, schedule, cfg.K, seed,
               record_every=cfg.record_every, noise=make_noise(cfg), x0=x0,
               caps=cfg.caps, nested=nested, lambda_projection=cfg.lambda_projection,
               lagged_updates=cfg.lagged_updates, cagrad_c=cfg.cagrad_c,
               batch_growth_every=cfg.batch_growth_every, record_x=cfg.record_x)


@dataclass
class BatchResult:
    paths: list
    records: list
    meta_path: str

    @property
    def all_diverged(self) -> bool:
        return all(r.diverged for r in self.records)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> BatchResult:
    """Execute one record per (start, seed) pair and write CSVs plus metadata.

    Runs are independent; with ``workers > 1`` they execute in a process
    pool. File names and contents depend only on the config, never on
    scheduling.
    """
    starts = default_starts(cfg)
    seeds = effective_seeds(cfg)
    tasks = [(si, x0, seed) for si, x0 in enumerate(starts) for seed in seeds]

    os.makedirs(cfg.out_dir, exist_ok=True)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, [cfg] * len(tasks),
                                    [t[1] for t in tasks], [t[2] for t in tasks]))
    else:
        records = [_run_one(cfg, x0, seed) for _, x0, seed in tasks]

    paths = []
    runs_meta = []
    for (si, x0, seed), rec in zip(tasks, records):
        name = f"traj_{cfg.method}_s{si:02d}_r{seed}.csv"
        path = os.path.join(cfg.out_dir, name)
        emit_csv(rec, path)
        paths.append(path)
        runs_meta.append({
            "file": name, "start_index": si, "start": [float(v) for v in x0],
            "seed": seed, "rows": int(rec.ks.size), "diverged": bool(rec.diverged),
            "final_stationarity_sq": float(rec.stationarity_sq[-1]) if rec.ks.size else None,
        })

    meta = {
        "config": serialize_config(cfg),
        "package_version": __version__,
        "git_describe": _git_describe(),
        "seed_override": os.environ.get("MOCO_SEED_OVERRIDE"),
        "runs": runs_meta,
    }
    meta_path = os.path.join(cfg.out_dir, f"meta_{cfg.method}.json")
    try:
        with open(meta_path, "w", newline="\n") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IOError(f"cannot write {meta_path}: {exc}") from exc
    return BatchResult(paths=paths, records=records, meta_path=meta_path)


BIAS_METHODS = ("smg", "smg-growing", "moco", "moco-nested", "mgda")


def run_bias_protocol(cfg: ExperimentConfig, workers: int = 1) -> BatchResult:
    """Walk the method's own trajectory, measuring direction bias at checkpoints.

    At k = 0, every ``bias_every`` iterations and at k = K, the method's
    direction is recomputed ``bias_sets`` times from fresh gradient samples
    (one tracking replicate per set for the corrected method), averaged, and
    compared against the exact multi-gradient at the current iterate.
    Checkpoints also record the cumulative number of training samples drawn
    so far, which grows faster than k for the growing-batch variant.
    """
    if cfg.method not in BIAS_METHODS:
        raise ValueError(f"bias protocol needs a direction-producing method, got {cfg.method!r}")
    starts = default_starts(cfg)
    seeds = effective_seeds(cfg)
    tasks = [(si, x0, seed) for si, x0 in enumerate(starts) for seed in seeds]

    os.makedirs(cfg.out_dir, exist_ok=True)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_bias_one, [cfg] * len(tasks),
                                    [t[1] for t in tasks], [t[2] for t in tasks]))
    else:
        reports = [_bias_one(cfg, x0, seed) for _, x0, seed in tasks]

    paths = []
    runs_meta = []
    for (si, x0, seed), rep in zip(tasks, reports):
        name = f"bias_{cfg.method}_s{si:02d}_r{seed}.csv"
        path = os.path.join(cfg.out_dir, name)
        _bias_csv(rep, path)
        paths.append(path)
        runs_meta.append({"file": name, "start_index": si, "seed": seed,
                          "start": [float(v) for v in x0],
                          "checkpoints": len(rep.ks),
                          "final_bias": rep.bias[-1] if rep.bias else None})

    meta = {
        "config": serialize_config(cfg),
        "package_version": __version__,
        "git_describe": _git_describe(),
        "runs": runs_meta,
    }
    meta_path = os.path.join(cfg.out_dir, f"meta_bias_{cfg.method}.json")
    with open(meta_path, "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return BatchResult(paths=paths, records=reports, meta_path=meta_path)


def _bias_one(cfg: ExperimentConfig, x0, seed: int) -> BiasReport:
    problem = make_problem(cfg)
    schedule = make_schedule(cfg)
    nested = make_nested(cfg) if cfg.method == "moco-nested" else None
    driver = MethodDriver(cfg.method, problem, schedule, seed, noise=make_noise(cfg),
                          x0=x0, caps=cfg.caps, nested=nested,
                          lambda_projection=cfg.lambda_projection,
                          lagged_updates=cfg.lagged_updates,
                          batch_growth_every=cfg.batch_growth_every)
    diag_rng = RngStream(seed, STREAM_DIAG)
    report = BiasReport(method=cfg.method)
    samples = 0

    def checkpoint():
        val = direction_bias(driver.direction_sample, driver.x, cfg.bias_sets,
                             problem, diag_rng)
        report.append(driver.k, samples, val)

    checkpoint()
    for k in range(1, cfg.K + 1):
        driver.step()
        samples += driver.samples_per_step(k)
        if not np.all(np.isfinite(driver.x)):
            break
        if k % cfg.bias_every == 0 or k == cfg.K:
            checkpoint()
    return report


def sweep(cfg: ExperimentConfig, axis: str, values, workers: int = 1) -> dict:
    """Run the config once per axis value and summarize stationarity.

    Produces per-value mean and standard error (across seeds) of the final
    and running-mean stationarity, plus a fitted log-log slope of the running
    mean when the axis is K. Values execute independently, so permuting them
    permutes summary rows and changes nothing else.
    """
    if axis not in ExperimentConfig.__dataclass_fields__:
        raise ValueError(f"unknown sweep axis {axis!r}")
    if ExperimentConfig.__dataclass_fields__[axis].type not in ("int", "float", "int | None", "float | None"):
        raise ValueError(f"sweep axis {axis!r} is not numeric")

    rows = []
    for value in values:
        cast = int(value) if isinstance(getattr(cfg, axis), int) else float(value)
        sub = replace(cfg, **{axis: cast})
        starts = default_starts(sub)
        seeds = effective_seeds(sub)
        finals, means = [], []
        for x0 in starts:
            for seed in seeds:
                rec = _run_one(sub, x0, seed)
                finals.append(rec.stationarity_sq[-1])
                means.append(rec.mean_stationarity())
        n = len(finals)
        rows.append({
            "value": cast,
            "final_mean": float(np.mean(finals)),
            "final_stderr": float(np.std(finals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            "running_mean": float(np.mean(means)),
            "running_stderr": float(np.std(means, ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        })

    summary = {"axis": axis, "rows": rows}
    if axis == "K" and len(rows) > 1:
        logk = np.log10([r["value"] for r in rows])
        logs = np.log10([max(r["running_mean"], 1e-300) for r in rows])
        slope = float(np.polyfit(logk, logs, 1)[0])
        summary["loglog_slope"] = slope

    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"sweep_{axis}.json")
    with open(path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    csv_path = os.path.join(cfg.out_dir, f"sweep_{axis}.csv")
    with open(csv_path, "w", newline="\n") as fh:
        fh.write("value,final_mean,final_stderr,running_mean,running_stderr\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) for c in
                              ("value", "final_mean", "final_stderr",
                               "running_mean", "running_stderr")) + "\n")
    summary["json_path"] = path
    summary["csv_path"] = csv_path
    return summary
