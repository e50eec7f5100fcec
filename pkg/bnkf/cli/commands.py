import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from ..bnn import load_model, save_model, train, write_trace
from ..errors import ConfigError, DatasetError, MissingArtifactError
from ..evalkit import (
    BenchmarkConfig,
    FoldModels,
    SequenceData,
    emit_report,
    raise_for_failures,
    run_benchmark,
    run_checks,
    run_method,
    time_methods,
    timing_frame,
    tune_process_noise,
)
from ..geom import SensorPose, converted_position_measurement_batch
from ..hybrid import AXES, BNKF, BNKFE, BNN, EnsembleModel, train_ensemble
from ..seeding import derive_seed
from ..simkit import (
    SIGMA_COLUMNS,
    SupervisedDataset,
    assign_folds,
    build_supervised,
    downsample,
    generate_trajectory,
    read_dataset,
    read_manifest,
    read_trajectories,
    simulate_measurements,
    tier_sigmas,
    write_csv,
    write_dataset,
    write_manifest,
    write_measurements,
    write_trajectories,
)
from .config import RunConfig


__all__ = (
    "LOCK_NAME",
    "MANIFEST_NAME",
    "RunLock",
    "cmd_generate",
    "cmd_train",
    "cmd_eval",
    "cmd_timing",
    "tuning_dataset",
)


LOGGER = logging.getLogger(__name__)

LOCK_NAME = ".bnkf.lock"
MANIFEST_NAME = "manifest.yaml"

DESK_SCALE_NOTE = (
    "the full-scale protocol evaluates about 15000 sequences per test set (5000 trajectories x 3 rates); "
    "the default desk-scale run uses 500 trajectories x 3 rates"
)


class RunLock:
    """
    Exclusive claim on an output directory for one CLI invocation.

    Raises
    ------
    ConfigError
        another invocation holds the lock
    """
    def __init__(self, out):
        self.path = Path(out) / LOCK_NAME
        self._held = False

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                '{} is locked by another invocation; remove {} if that run is gone'.format(
                    self.path.parent, self.path)
            ) from None
        with os.fdopen(fd, "w") as fp:
            fp.write("{}\n".format(os.getpid()))
        self._held = True
        return self

    def __exit__(self, *exc):
        if self._held:
            self.path.unlink()
            self._held = False
        return False


def _data_dir(config: RunConfig, tier=None) -> Path:
    base = Path(config.out) / "data"
    return base if tier is None else base / tier


def _model_dir(config: RunConfig, tier, fold) -> Path:
    return Path(config.out) / "models" / tier / "fold{}".format(fold)


def _report_dir(config: RunConfig) -> Path:
    return Path(config.out) / "report"


def _refuse_nonempty(path: Path, force: bool):
    if path.exists() and any(path.iterdir()) and not force:
        raise ConfigError('{} is not empty; pass --force to overwrite'.format(path))


def _update_manifest(config: RunConfig, section: str, content: dict) -> Path:
    path = Path(config.out) / MANIFEST_NAME
    manifest = read_manifest(path)
    manifest["manifest_id"] = config.fingerprint()
    manifest["config"] = config.to_dict()
    manifest[section] = content
    write_manifest(manifest, path)
    LOGGER.info("Updated %s (%s)", path, section)
    return path


def _sensor(config: RunConfig) -> SensorPose:
    return SensorPose(config.simulation.sensor)


def _map(func, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [func(task) for task in tasks]


def _synthesize(task):
    seed, sim, traj_id, sensor = task
    return generate_trajectory(seed, sim.duration, sim.dt, sim.trajectory, traj_id, sensor)


def _observe(task):
    traj, sensor, tier, rates, master = task
    full = simulate_measurements(traj, sensor, tier, derive_seed(master, "noise", tier, traj.traj_id))
    sequences = [
        downsample(full, rate, derive_seed(master, "downsample", tier, traj.traj_id, rate))
        for rate in rates
    ]
    return sequences, [build_supervised(seq, traj) for seq in sequences]


def cmd_generate(config: RunConfig, force: bool = False) -> dict:
    '''
    Generates trajectories and, per tier, the measurement sequences at
    every configured rate and the fold-assigned supervised dataset.

    Writes ``data/trajectories.csv`` and ``data/<tier>/{measurements,dataset}.csv``.

    Raises
    ------
    ConfigError
        the data directory is not empty and ``force`` is off
    '''
    sim = config.simulation
    sensor = _sensor(config)
    _refuse_nonempty(_data_dir(config), force)

    if sim.trajectory_csv:
        trajectories = read_trajectories(sim.trajectory_csv)
        source = str(sim.trajectory_csv)
        LOGGER.info("Imported %d trajectories from %s", len(trajectories), source)
    else:
        tasks = [(derive_seed(config.seed, "trajectory", i), sim, i, sensor) for i in range(sim.n_trajectories)]
        trajectories = _map(_synthesize, tasks, config.workers)
        source = "synthetic"
        LOGGER.info("Generated %d trajectories", len(trajectories))
    write_trajectories(trajectories, _data_dir(config) / "trajectories.csv")

    fold_seed = derive_seed(config.seed, "folds")
    counts = {}
    for tier in config.tiers:
        tasks = [(traj, sensor, tier, list(sim.rates), config.seed) for traj in trajectories]
        sequences, parts = [], []
        for seqs, datasets in _map(_observe, tasks, config.workers):
            sequences.extend(seqs)
            parts.extend(datasets)
        dataset = assign_folds(SupervisedDataset.concat(parts), sim.folds, fold_seed)
        write_measurements(sequences, _data_dir(config, tier) / "measurements.csv")
        write_dataset(dataset, _data_dir(config, tier) / "dataset.csv")
        counts[tier] = {"sequences": len(sequences), "returns": len(dataset), "pairs": len(dataset) - len(sequences)}
        LOGGER.info("Tier <%s>: %d sequences, %d returns", tier, len(sequences), len(dataset))

    section = {
        "trajectory_source": source,
        "n_trajectories": len(trajectories),
        "rates": [float(r) for r in sim.rates],
        "noise_tiers": {
            tier: dict(zip(SIGMA_COLUMNS, (float(v) for v in tier_sigmas(tier).as_vector())))
            for tier in config.tiers
        },
        "seeds": {
            "master": int(config.seed),
            "folds": int(fold_seed),
            "derivation": "sha256 of 'master:label:...' -> first 8 bytes, 63-bit mask",
            "trajectory": "derive_seed(master, 'trajectory', traj_id)",
            "noise": "derive_seed(master, 'noise', tier, traj_id)",
            "downsample": "derive_seed(master, 'downsample', tier, traj_id, rate)",
            "tune": "derive_seed(master, 'tune', tier) seeds the validation flights of the q grid search",
        },
        "counts": counts,
        "notes": {"scale": DESK_SCALE_NOTE},
    }
    _update_manifest(config, "generate", section)
    return section


def _load_dataset(config: RunConfig, tier) -> SupervisedDataset:
    path = _data_dir(config, tier) / "dataset.csv"
    if not path.exists():
        raise MissingArtifactError([path])
    return read_dataset(path)


def _wants_joint(methods):
    return BNN in methods or BNKF in methods


def cmd_train(config: RunConfig, force: bool = False) -> dict:
    '''
    Trains, per tier and fold, the joint network and the per-axis ensemble
    on the rows of every other fold.

    Writes ``models/<tier>/fold<k>/{joint,axis_x,axis_y,axis_z}.json`` with
    a ``*_trace.csv`` loss trace next to each.

    Raises
    ------
    MissingArtifactError
        a tier's dataset has not been generated
    '''
    datasets = {}
    missing = []
    for tier in config.tiers:
        try:
            datasets[tier] = _load_dataset(config, tier)
        except MissingArtifactError as e:
            missing.extend(e.missing)
    if missing:
        raise MissingArtifactError(missing)

    section = {}
    for tier, dataset in datasets.items():
        _refuse_nonempty(Path(config.out) / "models" / tier, force)
        pairs = dataset.pairs()
        if np.any(pairs.folds < 0):
            raise DatasetError('dataset of tier <{}> has rows without a fold'.format(tier))
        trained = {}
        for fold in sorted(int(f) for f in np.unique(pairs.folds)):
            rows = pairs.select(pairs.folds != fold)
            out = _model_dir(config, tier, fold)
            tags = {"tier": tier, "fold": fold}
            seeds = {}
            LOGGER.info("Tier <%s> fold %d: training on %d pairs", tier, fold, len(rows))
            if _wants_joint(config.methods):
                seeds["joint"] = derive_seed(config.seed, "train", tier, fold, "joint")
                joint = train(rows.features, rows.targets, replace(config.train, seed=seeds["joint"]),
                              dict(tags, role="joint"))
                save_model(joint, out / "joint.json")
                write_trace(joint, out / "joint_trace.csv")
            if BNKFE in config.methods:
                seeds["ensemble"] = derive_seed(config.seed, "train", tier, fold, "ensemble")
                ensemble = train_ensemble(rows.features, rows.targets,
                                          replace(config.train, seed=seeds["ensemble"]),
                                          dict(tags, role="ensemble"))
                for axis, model in zip(AXES, ensemble):
                    save_model(model, out / "axis_{}.json".format(axis))
                    write_trace(model, out / "axis_{}_trace.csv".format(axis))
            trained[fold] = {"train_pairs": len(rows), "seeds": seeds}
        section[tier] = trained
    _update_manifest(config, "train", section)
    return section


def _load_fold_models(config: RunConfig, tier, folds, methods):
    models, missing = {}, []
    for fold in folds:
        base = _model_dir(config, tier, fold)
        fm = FoldModels()
        if _wants_joint(methods):
            path = base / "joint.json"
            if path.exists():
                fm.joint = load_model(path)
            else:
                missing.append(path)
        if BNKFE in methods:
            paths = [base / "axis_{}.json".format(axis) for axis in AXES]
            absent = [p for p in paths if not p.exists()]
            if absent:
                missing.extend(absent)
            else:
                fm.ensemble = EnsembleModel([load_model(p) for p in paths])
        models[fold] = fm
    return models, missing


def _folds_of(dataset: SupervisedDataset):
    return sorted(int(f) for f in dataset.frame["fold"].unique())


def tuning_dataset(config: RunConfig, tier, first_id: int):
    '''
    Held-out validation sequences for the process-noise grid search.

    Fresh flights under ``derive_seed(master, 'tune', tier)``, observed with
    the tier's sigmas at every configured rate. Their ids start at
    ``first_id`` so none of them collides with an evaluated trajectory.

    Returns
    -------
    (SupervisedDataset, int)
        the validation rows and the seed they were drawn from
    '''
    sim = config.simulation
    sensor = _sensor(config)
    seed = derive_seed(config.seed, "tune", tier)
    n_traj = max(1, -(-int(config.filter.tuning_sequences) // len(sim.rates)))
    parts = []
    for i in range(n_traj):
        traj = _synthesize((derive_seed(seed, "trajectory", i), sim, first_id + i, sensor))
        _, datasets = _observe((traj, sensor, tier, list(sim.rates), seed))
        parts.extend(datasets)
    return SupervisedDataset.concat(parts), seed


def _process_noise(config: RunConfig, dataset: SupervisedDataset, tier):
    if config.filter.q is not None:
        return float(config.filter.q), {"q": float(config.filter.q), "tuned": False}
    first_id = int(dataset.frame["traj_id"].max()) + 1
    validation, seed = tuning_dataset(config, tier, first_id)
    ids = sorted(int(i) for i in validation.frame["traj_id"].unique())
    best, scores = tune_process_noise(
        validation, _sensor(config), config.filter.q_grid, config.filter.tuning_sequences,
        seed=derive_seed(seed, "subset"),
    )
    LOGGER.info("Tier <%s>: q=%g from %d validation trajectories", tier, best, len(ids))
    return best, {
        "q": best,
        "tuned": True,
        "validation_seed": int(seed),
        "validation_traj_ids": ids,
        "grid_scores": {float(k): float(v) for k, v in scores.items()},
    }


def _benchmark_config(config: RunConfig, q) -> BenchmarkConfig:
    return BenchmarkConfig(
        sensor=_sensor(config),
        accel_intensity=q,
        kappa=config.filter.kappa,
        mc_samples=config.train.mc_samples,
        seed=config.seed,
        workers=config.workers,
    )


def _load_all(config: RunConfig, tiers):
    loaded, missing = {}, []
    for tier in tiers:
        try:
            dataset = _load_dataset(config, tier)
        except MissingArtifactError as e:
            missing.extend(e.missing)
            continue
        models, absent = _load_fold_models(config, tier, _folds_of(dataset), config.methods)
        missing.extend(absent)
        loaded[tier] = (dataset, models)
    if missing:
        raise MissingArtifactError(missing)
    return loaded


def cmd_eval(config: RunConfig, check: bool = False) -> dict:
    '''
    Benchmarks the configured methods on every tier and writes the report.

    With ``check`` the acceptance properties are evaluated after the report
    is written; any failure raises :class:`~bnkf.errors.PropertyCheckFailure`.

    Raises
    ------
    MissingArtifactError
        every absent dataset or model file, listed together
    '''
    loaded = _load_all(config, config.tiers)
    results = []
    section = {"process_noise": {}}
    for tier, (dataset, models) in loaded.items():
        q, section["process_noise"][tier] = _process_noise(config, dataset, tier)
        results.append(run_benchmark(dataset, config.methods, models, _benchmark_config(config, q)))

    report = _report_dir(config)
    emit_report(results, report, config.fingerprint())
    section["report"] = str(report)

    checks = []
    if check:
        checks = run_checks(results, per_step=pd.read_csv(report / "per_step.csv"))
        write_csv(pd.DataFrame([vars(c) for c in checks], columns=["name", "status", "detail"]),
                  report / "checks.csv")
        section["checks"] = {c.name: c.status for c in checks}
    _update_manifest(config, "eval", section)
    raise_for_failures(checks)
    return section


def _pick_sequence(config: RunConfig, dataset: SupervisedDataset) -> SequenceData:
    frame = dataset.frame
    traj_id = config.timing.traj_id
    if traj_id is None:
        traj_id = int(frame["traj_id"].iloc[0])
    rows = frame[(frame["traj_id"] == traj_id) & (frame["rate"] == config.timing.rate)]
    if rows.empty:
        raise ConfigError('No sequence for trajectory {} at rate {} in tier <{}>'.format(
            traj_id, config.timing.rate, config.tiers[0]))
    return SequenceData.from_rows(rows)


def _example_frame(seq: SequenceData, methods, models, bench: BenchmarkConfig) -> pd.DataFrame:
    converted, _ = converted_position_measurement_batch(seq.values, seq.sigmas, bench.sensor)
    columns = {
        "step": np.arange(2, len(seq)),
        "t": seq.times[2:],
        "tx": seq.truth[2:, 0], "ty": seq.truth[2:, 1], "tz": seq.truth[2:, 2],
        "zx": converted[2:, 0], "zy": converted[2:, 1], "zz": converted[2:, 2],
    }
    for method in methods:
        means, covs, _ = run_method(method, seq, models, bench)
        std = np.sqrt(np.diagonal(covs, axis1=1, axis2=2))
        for k, axis in enumerate(AXES):
            columns["{}_{}".format(method, axis)] = means[:, k]
        for k, axis in enumerate(AXES):
            columns["{}_s{}".format(method, axis)] = std[:, k]
    return pd.DataFrame(columns)


def cmd_timing(config: RunConfig) -> dict:
    '''
    Times full-trajectory inference of every method on one sequence of the
    first configured tier.

    Writes ``report/timing.csv`` and ``report/trajectory_example.csv``
    (truth, converted measurement and each method's estimate with its
    position standard deviations). One warm-up run per method is excluded
    from the timings.
    '''
    tier = config.tiers[0]
    loaded = _load_all(config, [tier])
    dataset, models = loaded[tier]
    seq = _pick_sequence(config, dataset)
    q, tuning = _process_noise(config, dataset, tier)
    bench = replace(_benchmark_config(config, q), workers=1)
    fold_models = models.get(seq.fold)

    results = time_methods(config.methods, seq, fold_models, bench, config.timing.repeats, config.timing.warmup)
    entries = [
        {"result": r, "tier": tier, "traj_id": seq.traj_id, "rate": seq.rate, "n_steps": len(seq)}
        for r in results
    ]
    report = _report_dir(config)
    manifest_id = config.fingerprint()
    write_csv(timing_frame(entries, manifest_id), report / "timing.csv")
    example = _example_frame(seq, config.methods, fold_models, bench)
    write_csv(example.assign(manifest_id=manifest_id), report / "trajectory_example.csv")

    section = {
        "tier": tier,
        "traj_id": seq.traj_id,
        "rate": seq.rate,
        "fold": seq.fold,
        "n_steps": len(seq),
        "repeats": max(5, int(config.timing.repeats)),
        "warmup": int(config.timing.warmup),
        "process_noise": tuning,
    }
    _update_manifest(config, "timing", section)
    return section
