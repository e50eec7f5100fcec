import logging
from dataclasses import asdict
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from ..errors import BnkfError
from ..simkit import write_csv, write_manifest
from .benchmark import METHODS, METRICS, STEP_COLUMNS, BenchmarkResult
from .timing import TimingResult


__all__ = (
    "SUMMARY_COLUMNS",
    "TIMING_COLUMNS",
    "REPORT_NOTES",
    "summary_frame",
    "folds_frame",
    "timing_frame",
    "emit_report",
)


LOGGER = logging.getLogger(__name__)

TIER_ORDER = ("low", "medium", "high")

SUMMARY_COLUMNS = [
    "method", "tier", "rate", "n_records",
    "ed_mean", "ed_std", "md_mean", "md_std", "det_mean", "det_std",
    "time_per_trajectory", "manifest_id",
]
NOISE_SWEEP_COLUMNS = ["method", "tier", "ed_mean", "md_mean", "det_mean", "manifest_id"]
AVERAGED_COLUMNS = ["method", "n_tiers", "ed_mean", "md_mean", "det_mean", "manifest_id"]
FOLD_COLUMNS = ["method", "tier", "rate", "fold", "status", "n_records",
                "ed_mean", "md_mean", "det_mean", "manifest_id"]
TIMING_COLUMNS = ["method", "tier", "traj_id", "rate", "n_steps",
                  "median_s", "min_s", "max_s", "repeats", "manifest_id"]

REPORT_NOTES = {
    "ed": "mean Euclidean distance between estimated and true position, meters",
    "md": "mean of the squared Mahalanobis distance D^2 of the truth under the estimate; "
          "a consistent 3-D estimator averages 3",
    "det": "determinant of the 3x3 position covariance, m^6; the position block is used for every method",
    "std": "sample std of the per-fold means; EKF and UKF are deterministic and pool all records with std 0",
    "skipped": "the first two returns of every sequence initialize the trackers and are not scored",
    "features": "range, bearing, elevation, range rate at t and t+1, then the four noise sigmas; "
                "the time gap is not a feature",
    "hybrid": "each step is estimated independently from its two raw returns; estimates are not fed back",
}


def _tier_key(tier):
    return TIER_ORDER.index(tier) if tier in TIER_ORDER else len(TIER_ORDER)


def _ordered(results: Sequence[BenchmarkResult]):
    return sorted(results, key=lambda r: _tier_key(r.tier))


def summary_frame(results: Sequence[BenchmarkResult], manifest_id: str = "") -> pd.DataFrame:
    rows = []
    for result in _ordered(results):
        for record in result.aggregates:
            row = asdict(record)
            row.pop("fold_means")
            row["manifest_id"] = manifest_id
            rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def folds_frame(results: Sequence[BenchmarkResult], manifest_id: str = "") -> pd.DataFrame:
    '''
    Every ``(method, tier, rate, fold)`` cell, marked ``ok`` when it holds
    records and ``absent`` otherwise.
    '''
    rows = []
    for result in _ordered(results):
        steps = result.steps
        rates = sorted(steps["rate"].unique(), reverse=True) if len(steps) else []
        for method in result.methods:
            for rate in rates:
                for fold in result.folds:
                    cell = steps[(steps["method"] == method) & (steps["rate"] == rate) & (steps["fold"] == fold)]
                    row = {"method": method, "tier": result.tier, "rate": "{:g}".format(rate), "fold": fold,
                           "n_records": len(cell), "manifest_id": manifest_id}
                    if len(cell):
                        row["status"] = "ok"
                        means = cell[list(METRICS)].mean()
                        row.update(ed_mean=means["euclidean_error"], md_mean=means["mahalanobis_sq"],
                                   det_mean=means["cov_det"])
                    else:
                        row["status"] = "absent"
                        row.update(ed_mean=np.nan, md_mean=np.nan, det_mean=np.nan)
                        LOGGER.warning("No records for %s/%s rate %g fold %d", method, result.tier, rate, fold)
                    rows.append(row)
    return pd.DataFrame(rows, columns=FOLD_COLUMNS)


def _noise_sweep(summary: pd.DataFrame) -> pd.DataFrame:
    pooled = summary[summary["rate"] == "all"]
    return pooled[NOISE_SWEEP_COLUMNS].reset_index(drop=True)


def _averaged(summary: pd.DataFrame, manifest_id: str) -> pd.DataFrame:
    pooled = summary[summary["rate"] == "all"]
    rows = []
    for method in [m for m in METHODS if m in set(pooled["method"])]:
        sel = pooled[pooled["method"] == method]
        rows.append({
            "method": method,
            "n_tiers": len(sel),
            "ed_mean": float(sel["ed_mean"].mean()),
            "md_mean": float(sel["md_mean"].mean()),
            "det_mean": float(sel["det_mean"].mean()),
            "manifest_id": manifest_id,
        })
    return pd.DataFrame(rows, columns=AVERAGED_COLUMNS)


def timing_frame(timings: List[dict], manifest_id: str = "") -> pd.DataFrame:
    '''
    Parameters
    ----------
    timings : list of dict
        ``{"result": TimingResult, "tier", "traj_id", "rate", "n_steps"}``
    '''
    rows = []
    for entry in timings:
        result: TimingResult = entry["result"]
        rows.append({
            "method": result.method,
            "tier": entry["tier"],
            "traj_id": entry["traj_id"],
            "rate": entry["rate"],
            "n_steps": entry["n_steps"],
            "median_s": result.median,
            "min_s": result.minimum,
            "max_s": result.maximum,
            "repeats": len(result.repeats),
            "manifest_id": manifest_id,
        })
    return pd.DataFrame(rows, columns=TIMING_COLUMNS)


def emit_report(results: Sequence[BenchmarkResult], path, manifest_id: str = "", timings=None) -> List[Path]:
    '''
    Writes the plot-ready report files.

    ``summary.csv``, ``per_step.csv``, ``noise_sweep.csv``,
    ``averaged.csv``, ``folds.csv`` and ``report.yaml``; ``timing.csv``
    only when ``timings`` are given. Every CSV carries a ``manifest_id``
    column.

    Raises
    ------
    BnkfError
        no aggregates to report
    '''
    results = list(results)
    if not results or not any(r.aggregates for r in results):
        raise BnkfError('Nothing to report: the benchmark produced no aggregates')
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)

    summary = summary_frame(results, manifest_id)
    steps = pd.concat([r.steps for r in _ordered(results)], ignore_index=True)[STEP_COLUMNS]
    steps = steps.assign(manifest_id=manifest_id)
    written = [
        write_csv(summary, out / "summary.csv"),
        write_csv(steps, out / "per_step.csv"),
        write_csv(_noise_sweep(summary), out / "noise_sweep.csv"),
        write_csv(_averaged(summary, manifest_id), out / "averaged.csv"),
        write_csv(folds_frame(results, manifest_id), out / "folds.csv"),
    ]
    if timings:
        written.append(write_csv(timing_frame(timings, manifest_id), out / "timing.csv"))
    written.append(write_manifest({
        "manifest_id": manifest_id,
        "tiers": [r.tier for r in _ordered(results)],
        "methods": list(results[0].methods),
        "notes": dict(REPORT_NOTES),
    }, out / "report.yaml"))
    for p in written:
        LOGGER.info("Wrote %s", p)
    return written
