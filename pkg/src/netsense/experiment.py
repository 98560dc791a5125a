"""Scenario execution, metric computation, and result file emission.

A scenario is a run matrix of (strategy x bandwidth level) cells. Every cell
produces one records CSV plus optional plot-data series; the summary table
is recomputed purely from those CSVs, so `summarize` can always rebuild it.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, replace

from .config import (
    STRATEGY_NETSENSE,
    ExperimentConfig,
    config_from_overrides,
)
from .errors import ConfigurationError
from .records import ExperimentRecord, read_records_csv, write_records_csv
from .training import run_training

MANIFEST_NAME = "run_manifest.json"
NOT_AVAILABLE = "N/A"


# ---------------------------------------------------------------------------
# metrics


def compute_tta(records: list[ExperimentRecord], target_accuracy: float) -> float | None:
    """Simulated seconds until accuracy first reaches the target, else None."""
    for rec in records:
        if rec.accuracy >= target_accuracy:
            return rec.sim_time_s
    return None


def compute_throughput(
    records: list[ExperimentRecord], window: int
) -> list[tuple[float, float]]:
    """Sliding-window mean of per-step training throughput.

    The series starts at the first full window of ``window`` steps.
    """
    if window <= 0:
        raise ConfigurationError("window must be positive")
    out = []
    acc = 0.0
    for i, rec in enumerate(records):
        acc += rec.samples_per_sec
        if i >= window:
            acc -= records[i - window].samples_per_sec
        if i >= window - 1:
            out.append((rec.sim_time_s, acc / window))
    return out


def convergence_time(
    records: list[ExperimentRecord],
    target_accuracy: float,
    band: float,
    consecutive: int,
    eval_every: int,
) -> float | None:
    """First time accuracy enters and stays within +-band of the target.

    Stability is judged over ``consecutive`` evaluation points (one per
    ``eval_every`` steps); the reported time is the first point of the
    qualifying stretch.
    """
    evals = [r for r in records if r.step % eval_every == 0]
    run_start = None
    run_len = 0
    for rec in evals:
        if abs(rec.accuracy - target_accuracy) <= band:
            if run_start is None:
                run_start = rec.sim_time_s
            run_len += 1
            if run_len >= consecutive:
                return run_start
        else:
            run_start = None
            run_len = 0
    return None


def mean_throughput(records: list[ExperimentRecord]) -> float:
    return sum(r.samples_per_sec for r in records) / len(records)


def accuracy_at_time(records: list[ExperimentRecord], t: float) -> float:
    """Accuracy of the last record no later than ``t`` (baseline truncation)."""
    acc = records[0].accuracy
    for rec in records:
        if rec.sim_time_s > t:
            break
        acc = rec.accuracy
    return acc


def time_of_best_accuracy(records: list[ExperimentRecord]) -> float:
    best = max(r.accuracy for r in records)
    for rec in records:
        if rec.accuracy == best:
            return rec.sim_time_s
    return records[-1].sim_time_s


# ---------------------------------------------------------------------------
# plot data


def emit_plotdata(records: list[ExperimentRecord], out_dir: str, stem: str) -> list[str]:
    """Write the four plot-ready series for one cell; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    series = {
        "accuracy": ["sim_time_s,accuracy"]
        + [f"{r.sim_time_s!r},{r.accuracy!r}" for r in records],
        "throughput": ["sim_time_s,samples_per_sec"]
        + [f"{t!r},{v!r}" for t, v in compute_throughput(records, min(10, len(records)))],
        "ratio": ["sim_time_s,ratio"] + [f"{r.sim_time_s!r},{r.ratio!r}" for r in records],
        "bdp_vs_payload": ["sim_time_s,bdp_bits,data_size_bits"]
        + [f"{r.sim_time_s!r},{r.bdp_bits!r},{r.data_size_bits!r}" for r in records],
    }
    paths = []
    for kind, lines in series.items():
        path = os.path.join(out_dir, f"{stem}_{kind}.csv")
        try:
            with open(path, "w") as f:
                f.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise ConfigurationError(f"cannot write plot data to {path}: {exc}") from exc
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# scenario runner


def _cell_stem(name: str, strategy: str, level_bps: float) -> str:
    level = f"{level_bps / 1e6:g}".replace(".", "p")
    return f"{name}_{strategy}_{level}mbps"


def run_scenario(
    cfg: ExperimentConfig,
    out_dir: str,
    seed: int | None = None,
    overrides: list[str] | None = None,
    write_plotdata: bool = True,
) -> dict:
    """Execute the full run matrix; returns the summary structure."""
    if overrides:
        cfg = config_from_overrides(cfg, overrides)
    if seed is not None:
        cfg = replace(cfg, run=replace(cfg.run, seed=seed))
    os.makedirs(out_dir, exist_ok=True)

    levels = cfg.network.levels()
    cells = {}
    for level in levels:
        for strategy in cfg.run.strategies:
            result = run_training(cfg, strategy, level_bps=level)
            stem = _cell_stem(cfg.name, strategy, level)
            csv_path = os.path.join(out_dir, f"{stem}.csv")
            write_records_csv(csv_path, result.records)
            if write_plotdata:
                emit_plotdata(result.records, os.path.join(out_dir, "plotdata"), stem)
            cells[(level, strategy)] = (stem, result.records)

    manifest = {
        "schema": "netsense.manifest/v1",
        "name": cfg.name,
        "target_accuracy": cfg.run.target_accuracy,
        "eval_every": cfg.run.eval_every,
        "convergence_band": cfg.run.convergence_band,
        "convergence_evals": cfg.run.convergence_evals,
        "seed": cfg.run.seed,
        "cells": [
            {
                "stem": stem,
                "strategy": strategy,
                "bandwidth_bps": level,
                "csv": f"{stem}.csv",
            }
            for (level, strategy), (stem, _) in cells.items()
        ],
        "config": {
            "model": asdict(cfg.model),
            "controller": asdict(cfg.controller),
            "compression": asdict(cfg.compression),
            "network": asdict(cfg.network),
            "run": asdict(cfg.run),
        },
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)

    summary = summarize_cells(
        {key: recs for key, (stem, recs) in cells.items()},
        target_accuracy=cfg.run.target_accuracy,
        eval_every=cfg.run.eval_every,
        band=cfg.run.convergence_band,
        consecutive=cfg.run.convergence_evals,
        name=cfg.name,
    )
    write_summary_csv(os.path.join(out_dir, "summary.csv"), summary)
    return summary


SUMMARY_COLUMNS = (
    "scenario",
    "strategy",
    "bandwidth_bps",
    "final_accuracy",
    "best_accuracy",
    "accuracy_at_ref_time",
    "mean_samples_per_sec",
    "tta_s",
    "convergence_time_s",
    "steps",
    "loss_events",
)


def summarize_cells(
    cells: dict[tuple[float, str], list[ExperimentRecord]],
    target_accuracy: float,
    eval_every: int,
    band: float,
    consecutive: int,
    name: str,
) -> dict:
    """Build summary rows; baselines are also reported truncated at the
    adaptive run's best-accuracy time when both share a bandwidth level."""
    rows = []
    ref_times = {
        level: time_of_best_accuracy(recs)
        for (level, strategy), recs in cells.items()
        if strategy == STRATEGY_NETSENSE
    }
    for (level, strategy), recs in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        tta = compute_tta(recs, target_accuracy) if target_accuracy > 0 else None
        conv = (
            convergence_time(recs, target_accuracy, band, consecutive, eval_every)
            if target_accuracy > 0
            else None
        )
        ref_time = ref_times.get(level)
        rows.append(
            {
                "scenario": name,
                "strategy": strategy,
                "bandwidth_bps": level,
                "final_accuracy": recs[-1].accuracy,
                "best_accuracy": max(r.accuracy for r in recs),
                "accuracy_at_ref_time": (
                    accuracy_at_time(recs, ref_time) if ref_time is not None else None
                ),
                "mean_samples_per_sec": mean_throughput(recs),
                "tta_s": tta,
                "convergence_time_s": conv,
                "steps": len(recs),
                "loss_events": sum(r.loss_event for r in recs),
            }
        )
    return {"columns": list(SUMMARY_COLUMNS), "rows": rows}


def write_summary_csv(path: str, summary: dict) -> None:
    def fmt(v):
        if v is None:
            return NOT_AVAILABLE
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w") as f:
        f.write(",".join(summary["columns"]) + "\n")
        for row in summary["rows"]:
            f.write(",".join(fmt(row[c]) for c in summary["columns"]) + "\n")


def summarize_directory(out_dir: str) -> dict:
    """Recompute the summary table from a run directory's CSVs."""
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise ConfigurationError(f"no {MANIFEST_NAME} in {out_dir}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("schema") != "netsense.manifest/v1":
        raise ConfigurationError("unsupported manifest schema")
    cells = {}
    for cell in manifest["cells"]:
        records = read_records_csv(os.path.join(out_dir, cell["csv"]))
        cells[(cell["bandwidth_bps"], cell["strategy"])] = records
    return summarize_cells(
        cells,
        target_accuracy=manifest["target_accuracy"],
        eval_every=manifest["eval_every"],
        band=manifest["convergence_band"],
        consecutive=manifest["convergence_evals"],
        name=manifest["name"],
    )


def format_summary_table(summary: dict) -> str:
    cols = summary["columns"]
    rows = [[_cell_text(row[c]) for c in cols] for row in summary["rows"]]
    widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(cols))]
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(cols))))
    return "\n".join(lines)


def _cell_text(v) -> str:
    if v is None:
        return NOT_AVAILABLE
    if isinstance(v, float):
        if v == 0 or (abs(v) >= 0.01 and abs(v) < 1e7):
            return f"{v:.4g}"
        return f"{v:.4e}"
    return str(v)
