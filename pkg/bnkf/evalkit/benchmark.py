import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ..bnn import BnnModel, feature_matrix
from ..errors import MissingArtifactError
from ..filters import ExtendedRadarTracker, ProcessModel, UnscentedRadarTracker
from ..geom import POSITION_INDEX, SensorPose
from ..hybrid import (
    BNKF,
    BNKFE,
    BNN,
    EnsembleModel,
    bnkf_estimate_batch,
    bnkfe_estimate_batch,
    bnn_estimate_batch,
)
from ..seeding import derive_seed, make_rng
from ..simkit import MEASUREMENT_VALUE_COLUMNS, SIGMA_COLUMNS, TARGET_COLUMNS, SupervisedDataset
from .metrics import cov_volume, euclidean_error, mahalanobis_sq_batch


__all__ = (
    "EKF",
    "UKF",
    "METHODS",
    "FILTER_METHODS",
    "LEARNED_METHODS",
    "SKIPPED_STEPS",
    "FoldModels",
    "BenchmarkConfig",
    "StepRecord",
    "AggregateRecord",
    "BenchmarkResult",
    "SequenceData",
    "run_method",
    "evaluate_sequence",
    "aggregate",
    "run_benchmark",
    "tune_process_noise",
)


LOGGER = logging.getLogger(__name__)

EKF = "ekf"
UKF = "ukf"
METHODS = (EKF, UKF, BNN, BNKF, BNKFE)
FILTER_METHODS = (EKF, UKF)
LEARNED_METHODS = (BNN, BNKF, BNKFE)

# returns per sequence without a scored estimate: the two-point initialization
SKIPPED_STEPS = 2

METRICS = ("euclidean_error", "mahalanobis_sq", "cov_det")


@dataclass
class FoldModels:
    """The networks trained without one fold."""
    joint: Optional[BnnModel] = None
    ensemble: Optional[EnsembleModel] = None


@dataclass
class BenchmarkConfig:
    '''
    Attributes
    ----------
    sensor : SensorPose
    accel_intensity : float
        ``q`` of the constant-velocity filters
    kappa : float
        UKF sigma-point spread
    mc_samples : int
        Monte-Carlo passes of the learned estimators
    seed : int
        master seed of the Monte-Carlo streams
    workers : int
        process pool size; 1 runs in-process
    '''
    sensor: SensorPose = field(default_factory=SensorPose)
    accel_intensity: float = 1.0
    kappa: float = 0.0
    mc_samples: int = 100
    seed: int = 0
    workers: int = 1


@dataclass
class StepRecord:
    """One scored estimate; the rows of ``per_step.csv``."""
    traj_id: int
    rate: float
    fold: int
    step: int
    t: float
    method: str
    tier: str
    euclidean_error: float
    mahalanobis_sq: float
    cov_det: float
    prior_det: float
    prior_offdiag: float
    wall_time: float


STEP_COLUMNS = [f.name for f in fields(StepRecord)]


@dataclass
class AggregateRecord:
    '''
    Cross-validated summary of one method on one tier.

    ``*_mean`` is the mean of the per-fold means and ``*_std`` their sample
    standard deviation, except for the deterministic filters whose mean is
    pooled over every record and whose std is 0.
    '''
    method: str
    tier: str
    rate: str
    n_records: int
    ed_mean: float
    ed_std: float
    md_mean: float
    md_std: float
    det_mean: float
    det_std: float
    time_per_trajectory: float
    fold_means: Dict[int, Dict[str, float]] = field(default_factory=dict, repr=False)


@dataclass
class SequenceData:
    """The arrays of one ``(traj_id, rate)`` sequence."""
    traj_id: int
    rate: float
    fold: int
    tier: str
    times: np.ndarray
    values: np.ndarray
    sigmas: np.ndarray
    truth: np.ndarray

    @classmethod
    def from_rows(cls, rows: pd.DataFrame) -> "SequenceData":
        return cls(
            int(rows["traj_id"].iloc[0]),
            float(rows["rate"].iloc[0]),
            int(rows["fold"].iloc[0]),
            str(rows["tier"].iloc[0]),
            rows["t"].to_numpy(),
            rows[MEASUREMENT_VALUE_COLUMNS].to_numpy(),
            rows[SIGMA_COLUMNS].to_numpy(),
            rows[TARGET_COLUMNS].to_numpy(),
        )

    def __len__(self):
        return len(self.times)

    def scored_features(self) -> np.ndarray:
        """Feature rows of the pairs ending at returns ``2 .. N-1``."""
        return feature_matrix(self.values[1:-1], self.values[2:], self.sigmas[2:])


@dataclass
class BenchmarkResult:
    """Per-step records and aggregates of one tier."""
    tier: str
    steps: pd.DataFrame
    aggregates: List[AggregateRecord]
    methods: List[str]
    folds: List[int]

    def records(self):
        for row in self.steps.itertuples(index=False):
            yield StepRecord(*row)


def run_method(method: str, seq: SequenceData, models: Optional[FoldModels], config: BenchmarkConfig):
    '''
    Position estimates of one method for the scored returns of a sequence.

    Returns
    -------
    means : np.ndarray
        ``(N - 2, 3)``
    covariances : np.ndarray
        ``(N - 2, 3, 3)``
    prior_covariances : np.ndarray or None
        pre-correction covariances of the learned methods
    '''
    if method in FILTER_METHODS:
        process = ProcessModel(config.accel_intensity)
        if method == EKF:
            tracker = ExtendedRadarTracker(config.sensor, process)
        else:
            tracker = UnscentedRadarTracker(config.sensor, process, config.kappa)
        states = tracker.run(seq.values, seq.times, seq.sigmas)[1:]
        idx = np.ix_(POSITION_INDEX, POSITION_INDEX)
        means = np.array([s.mean[POSITION_INDEX] for s in states]).reshape(-1, 3)
        covs = np.array([s.covariance[idx] for s in states]).reshape(-1, 3, 3)
        return means, covs, None

    seed = derive_seed(config.seed, "mc", seq.traj_id, seq.rate, method)
    X = seq.scored_features()
    if method == BNN:
        out = bnn_estimate_batch(models.joint, X, seed, config.mc_samples)
    elif method == BNKF:
        out = bnkf_estimate_batch(models.joint, X, config.sensor, seed, config.mc_samples)
    elif method == BNKFE:
        out = bnkfe_estimate_batch(models.ensemble, X, config.sensor, seed, config.mc_samples)
    else:
        raise ValueError('Unknown method <{}>'.format(method))
    return out.means, out.covariances, out.prior_covariances


def evaluate_sequence(seq: SequenceData, methods, models: Optional[FoldModels],
                      config: BenchmarkConfig) -> pd.DataFrame:
    """Scores every method on one sequence; ``N - 2`` rows per method."""
    n = len(seq) - SKIPPED_STEPS
    if n <= 0:
        return pd.DataFrame(columns=STEP_COLUMNS)
    truth = seq.truth[SKIPPED_STEPS:]
    frames = []
    for method in methods:
        start = time.perf_counter()
        means, covs, prior_covs = run_method(method, seq, models, config)
        elapsed = time.perf_counter() - start
        if prior_covs is None:
            prior_det = np.full(n, np.nan)
            prior_offdiag = np.full(n, np.nan)
        else:
            prior_det = np.linalg.det(prior_covs)
            prior_offdiag = np.max(np.abs(prior_covs - prior_covs * np.eye(3)), axis=(1, 2))
        frames.append(pd.DataFrame({
            "traj_id": np.full(n, seq.traj_id, dtype=np.int64),
            "rate": np.full(n, seq.rate),
            "fold": np.full(n, seq.fold, dtype=np.int64),
            "step": np.arange(SKIPPED_STEPS, len(seq), dtype=np.int64),
            "t": seq.times[SKIPPED_STEPS:],
            "method": method,
            "tier": seq.tier,
            "euclidean_error": euclidean_error(means, truth),
            "mahalanobis_sq": mahalanobis_sq_batch(truth, means, covs),
            "cov_det": cov_volume(covs),
            "prior_det": prior_det,
            "prior_offdiag": prior_offdiag,
            "wall_time": np.full(n, elapsed / n),
        }, columns=STEP_COLUMNS))
    return pd.concat(frames, ignore_index=True)


def _evaluate_task(args):
    return evaluate_sequence(*args)


def _rate_label(rate) -> str:
    return "all" if rate is None else "{:g}".format(rate)


def _aggregate_rows(rows: pd.DataFrame, method: str, tier: str, rate) -> AggregateRecord:
    per_fold = rows.groupby("fold")[list(METRICS)].mean()
    fold_means = {int(k): {m: float(v[m]) for m in METRICS} for k, v in per_fold.iterrows()}
    if method in FILTER_METHODS:
        means = rows[list(METRICS)].mean()
        stds = {m: 0.0 for m in METRICS}
    else:
        means = per_fold.mean()
        if len(per_fold) > 1:
            stds = per_fold.std(ddof=1)
        else:
            stds = {m: 0.0 for m in METRICS}
    per_sequence = rows.groupby(["traj_id", "rate"])["wall_time"].sum()
    return AggregateRecord(
        method=method,
        tier=tier,
        rate=_rate_label(rate),
        n_records=len(rows),
        ed_mean=float(means["euclidean_error"]),
        ed_std=float(stds["euclidean_error"]),
        md_mean=float(means["mahalanobis_sq"]),
        md_std=float(stds["mahalanobis_sq"]),
        det_mean=float(means["cov_det"]),
        det_std=float(stds["cov_det"]),
        time_per_trajectory=float(per_sequence.mean()),
        fold_means=fold_means,
    )


def aggregate(steps: pd.DataFrame, tier: str, methods=None) -> List[AggregateRecord]:
    '''
    Cross-validation summaries from per-step records.

    For each method one pooled record (rate ``all``) followed by one per
    sampling rate, highest rate first.
    '''
    out = []
    methods = methods or [m for m in METHODS if m in set(steps["method"])]
    for method in methods:
        rows = steps[steps["method"] == method]
        if rows.empty:
            continue
        out.append(_aggregate_rows(rows, method, tier, None))
        for rate in sorted(rows["rate"].unique(), reverse=True):
            out.append(_aggregate_rows(rows[rows["rate"] == rate], method, tier, float(rate)))
    return out


def _check_models(dataset, methods, models):
    needed = [m for m in methods if m in LEARNED_METHODS]
    if not needed:
        return
    missing = []
    for fold in sorted(set(dataset.frame["fold"])):
        fm = models.get(int(fold)) if models else None
        if (BNN in needed or BNKF in needed) and (fm is None or fm.joint is None):
            missing.append("fold {} joint model".format(fold))
        if BNKFE in needed and (fm is None or fm.ensemble is None):
            missing.append("fold {} axis ensemble".format(fold))
    if missing:
        raise MissingArtifactError(missing)


def run_benchmark(dataset: SupervisedDataset, methods=METHODS, models: Dict[int, FoldModels] = None,
                  config: BenchmarkConfig = None) -> BenchmarkResult:
    '''
    Evaluates methods on every sequence of a single-tier dataset.

    The recursive filters track each sequence from its first two returns;
    the learned estimators score each sequence with the models of the fold
    that held it out. All methods are scored on the same returns.

    Parameters
    ----------
    dataset : SupervisedDataset
        one tier, folds assigned
    methods : iterable of str
    models : Dict[int, FoldModels]
        fold id to its held-out models; required for learned methods
    config : BenchmarkConfig

    Raises
    ------
    MissingArtifactError
        a learned method lacks a model for some fold
    '''
    config = config or BenchmarkConfig()
    methods = [m for m in METHODS if m in set(methods)]
    _check_models(dataset, methods, models)
    tiers = dataset.tiers
    tier = tiers[0] if len(tiers) == 1 else "+".join(tiers)

    tasks = []
    for _, rows in dataset.sequences():
        seq = SequenceData.from_rows(rows)
        fold_models = models.get(seq.fold) if models else None
        tasks.append((seq, methods, fold_models, config))
    LOGGER.info("Benchmarking %s on %d sequences of tier <%s>", ",".join(methods), len(tasks), tier)

    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunk = max(1, len(tasks) // (4 * config.workers))
            frames = list(pool.map(_evaluate_task, tasks, chunksize=chunk))
    else:
        frames = [evaluate_sequence(*task) for task in tasks]
    steps = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=STEP_COLUMNS)

    aggregates = aggregate(steps, tier, methods)
    for record in aggregates:
        if record.rate == "all":
            LOGGER.info("%s/%s: ED=%.4g MD=%.4g Det=%.4g", record.method, tier,
                        record.ed_mean, record.md_mean, record.det_mean)
    folds = sorted(int(f) for f in set(dataset.frame["fold"]))
    return BenchmarkResult(tier, steps, aggregates, methods, folds)


def tune_process_noise(dataset: SupervisedDataset, sensor: SensorPose, grid=(0.01, 0.1, 1.0, 10.0, 100.0),
                       n_sequences: int = 20, seed=0):
    '''
    Coarse grid search of the acceleration intensity ``q``.

    ``dataset`` must be held out from the evaluation. A seeded subset of its
    sequences is filtered with every value; the lowest EKF mean Euclidean
    error wins.

    Returns
    -------
    best : float
    scores : dict
        ``q`` to mean Euclidean error
    '''
    groups = [rows for _, rows in dataset.sequences()]
    rng = make_rng(seed)
    chosen = np.sort(rng.choice(len(groups), size=min(n_sequences, len(groups)), replace=False))
    sequences = [SequenceData.from_rows(groups[i]) for i in chosen]
    scores = {}
    for q in grid:
        config = BenchmarkConfig(sensor=sensor, accel_intensity=float(q))
        errors = []
        for seq in sequences:
            means, _, _ = run_method(EKF, seq, None, config)
            errors.append(euclidean_error(means, seq.truth[SKIPPED_STEPS:]))
        scores[float(q)] = float(np.mean(np.concatenate(errors)))
        LOGGER.info("q=%g: EKF mean ED %.4g", q, scores[float(q)])
    best = min(scores, key=scores.get)
    LOGGER.info("Selected process noise q=%g", best)
    return best, scores
