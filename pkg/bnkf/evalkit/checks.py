import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from ..errors import PropertyCheckFailure
from ..hybrid import BNKF, BNKFE, BNN
from .benchmark import EKF, FILTER_METHODS, UKF, BenchmarkResult


__all__ = (
    "PASS",
    "FAIL",
    "SKIP",
    "CheckResult",
    "run_checks",
    "raise_for_failures",
)


LOGGER = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
SKIP = "skip"

# low-noise EKF bar: three range sigmas of the low tier, meters
LOW_TIER_EKF_BAR = 3.0
HIGH_TIER_GAIN = 0.8


@dataclass
class CheckResult:
    name: str
    status: str
    detail: str = ""


def _pooled(results, tier, method, metric="ed_mean"):
    for result in results:
        if result.tier != tier:
            continue
        for record in result.aggregates:
            if record.method == method and record.rate == "all":
                return getattr(record, metric)
    return None


def _compare(name, values, predicate, describe):
    if any(v is None for v in values):
        return CheckResult(name, SKIP, "methods or tiers not evaluated")
    ok = bool(predicate(*values))
    return CheckResult(name, PASS if ok else FAIL, describe(*values))


def _high_noise_ordering(results):
    return _compare(
        "high_noise_bnkf_beats_filters",
        [_pooled(results, "high", BNKF), _pooled(results, "high", EKF), _pooled(results, "high", UKF)],
        lambda b, e, u: b < e and b < u and b <= HIGH_TIER_GAIN * e,
        lambda b, e, u: "BNKF {:.4g} m, EKF {:.4g} m, UKF {:.4g} m".format(b, e, u),
    )


def _hybrids_beat_bnn(results):
    tiers = [r.tier for r in results]
    failures, checked = [], 0
    for tier in tiers:
        bnn = _pooled(results, tier, BNN)
        for method in (BNKF, BNKFE):
            value = _pooled(results, tier, method)
            if bnn is None or value is None:
                continue
            checked += 1
            if not value < bnn:
                failures.append("{}/{}: {:.4g} >= BNN {:.4g}".format(method, tier, value, bnn))
    if not checked:
        return CheckResult("hybrids_beat_bnn", SKIP, "methods not evaluated")
    if failures:
        return CheckResult("hybrids_beat_bnn", FAIL, "; ".join(failures))
    return CheckResult("hybrids_beat_bnn", PASS, "{} comparisons".format(checked))


def _low_noise_ekf(results):
    return _compare(
        "low_noise_ekf_bar",
        [_pooled(results, "low", EKF)],
        lambda e: e <= LOW_TIER_EKF_BAR,
        lambda e: "EKF {:.4g} m (bar {} m)".format(e, LOW_TIER_EKF_BAR),
    )


def _high_noise_md(results):
    return _compare(
        "high_noise_bnkf_md",
        [_pooled(results, "high", BNKF, "md_mean"), _pooled(results, "high", EKF, "md_mean")],
        lambda b, e: b <= e,
        lambda b, e: "BNKF {:.4g}, EKF {:.4g}".format(b, e),
    )


def _high_noise_det(results):
    return _compare(
        "high_noise_bnkfe_det",
        [_pooled(results, "high", BNKFE, "det_mean"), _pooled(results, "high", BNKF, "det_mean")],
        lambda be, b: be <= b,
        lambda be, b: "BNKFe {:.4g}, BNKF {:.4g}".format(be, b),
    )


def _steps_of(results, method):
    frames = [r.steps[r.steps["method"] == method] for r in results]
    frames = [f for f in frames if len(f)]
    return frames


def _diagonal_prior(results):
    frames = _steps_of(results, BNKFE)
    if not frames:
        return CheckResult("bnkfe_prior_diagonal", SKIP, "BNKFe not evaluated")
    worst = max(float(f["prior_offdiag"].max()) for f in frames)
    return CheckResult("bnkfe_prior_diagonal", PASS if worst == 0.0 else FAIL,
                       "largest off-diagonal {:.3g}".format(worst))


def _no_inflation(results):
    frames = _steps_of(results, BNKF) + _steps_of(results, BNKFE)
    if not frames:
        return CheckResult("correction_never_inflates", SKIP, "hybrids not evaluated")
    bad = sum(int(np.sum(f["cov_det"] > f["prior_det"] * (1.0 + 1e-9))) for f in frames)
    return CheckResult("correction_never_inflates", PASS if bad == 0 else FAIL,
                       "{} steps with det(P) above the prior's".format(bad))


REAGGREGATED = {"ed": "euclidean_error", "md": "mahalanobis_sq", "det": "cov_det"}
REAGGREGATION_TOLERANCE = 1e-12


def _recompute(rows: pd.DataFrame, method):
    columns = list(REAGGREGATED.values())
    if method in FILTER_METHODS:
        return rows[columns].mean(), pd.Series(0.0, index=columns)
    per_fold = rows.pivot_table(index="fold", values=columns, aggfunc="mean", dropna=False)
    spread = per_fold.std(ddof=1) if len(per_fold) > 1 else pd.Series(0.0, index=columns)
    return per_fold.mean(), spread


def _deviation(a, b, scale):
    if np.isnan(a) or np.isnan(b):
        return 0.0 if np.isnan(a) and np.isnan(b) else np.inf
    scale = max(abs(scale), abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def _reaggregation(results, per_step=None):
    worst, checked = 0.0, 0
    for result in results:
        steps = result.steps if per_step is None else per_step[per_step["tier"] == result.tier]
        labels = steps["rate"].map("{:g}".format)
        for record in result.aggregates:
            mask = steps["method"] == record.method
            if record.rate != "all":
                mask &= labels == record.rate
            rows = steps[mask]
            if len(rows) != record.n_records:
                return CheckResult("reaggregation", FAIL, "{} {} {}: {} rows for {} records".format(
                    result.tier, record.method, record.rate, len(rows), record.n_records))
            means, spreads = _recompute(rows, record.method)
            for key, column in REAGGREGATED.items():
                mean = getattr(record, key + "_mean")
                worst = max(worst,
                            _deviation(mean, means[column], 0.0),
                            _deviation(getattr(record, key + "_std"), spreads[column], mean))
            checked += 1
    if not checked:
        return CheckResult("reaggregation", SKIP, "nothing aggregated")
    return CheckResult("reaggregation", PASS if worst <= REAGGREGATION_TOLERANCE else FAIL,
                       "max relative deviation {:.3g} over {} records".format(worst, checked))


CHECKS = (
    _high_noise_ordering,
    _hybrids_beat_bnn,
    _low_noise_ekf,
    _high_noise_md,
    _diagonal_prior,
    _high_noise_det,
    _no_inflation,
)


def run_checks(results: Sequence[BenchmarkResult], per_step: pd.DataFrame = None) -> List[CheckResult]:
    '''
    Evaluates the data-driven acceptance properties on benchmark results.

    Checks whose methods or tiers were not evaluated are reported as
    ``skip``. The summaries are re-derived from ``per_step`` when given,
    e.g. the emitted ``per_step.csv`` read back, else from the in-memory
    per-step records.
    '''
    results = list(results)
    out = [check(results) for check in CHECKS]
    out.append(_reaggregation(results, per_step))
    for check in out:
        log = LOGGER.warning if check.status == FAIL else LOGGER.info
        log("Check %s: %s (%s)", check.name, check.status, check.detail)
    return out


def raise_for_failures(checks: Sequence[CheckResult]):
    failed = [c.name for c in checks if c.status == FAIL]
    if failed:
        raise PropertyCheckFailure(failed)
