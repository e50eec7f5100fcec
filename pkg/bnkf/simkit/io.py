import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd
import yaml

from ..errors import DatasetError, SchemaError
from ..geom import NoiseSigmas
from .dataset import (
    COLUMN_DTYPES,
    DATASET_COLUMNS,
    MEASUREMENT_COLUMNS,
    MEASUREMENT_VALUE_COLUMNS,
    SIGMA_COLUMNS,
    SupervisedDataset,
)
from .measurements import MeasurementSequence
from .trajectory import Trajectory


__all__ = (
    "TRAJECTORY_COLUMNS",
    "write_csv",
    "read_csv",
    "write_trajectories",
    "read_trajectories",
    "write_measurements",
    "read_measurements",
    "write_dataset",
    "read_dataset",
    "write_manifest",
    "read_manifest",
)


LOGGER = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["traj_id", "t", "x", "y", "z", "vx", "vy", "vz"]
_TRAJECTORY_DTYPES = dict({c: float for c in TRAJECTORY_COLUMNS[1:]}, traj_id="int64")


def write_csv(frame: pd.DataFrame, path) -> Path:
    """UTF-8, LF line endings, floats at full round-trip precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")
    LOGGER.debug("Wrote %d rows to %s", len(frame), path)
    return path


def _check_header(columns, expected, path):
    for name in columns:
        if name not in expected:
            raise SchemaError(path, name, "is not part of the schema")
    for name in expected:
        if name not in columns:
            raise SchemaError(path, name, "is missing")
    for pos, (got, want) in enumerate(zip(columns, expected)):
        if got != want:
            raise SchemaError(path, got, "is out of order (expected '{}' at position {})".format(want, pos))


def read_csv(path, expected, dtypes) -> pd.DataFrame:
    '''
    Reads a CSV whose header must equal ``expected`` exactly.

    Raises
    ------
    SchemaError
        unknown, missing, misordered or unparsable column
    '''
    path = Path(path)
    header = list(pd.read_csv(path, nrows=0, encoding="utf-8").columns)
    _check_header(header, expected, path)
    try:
        return pd.read_csv(path, dtype=dtypes, float_precision="round_trip", encoding="utf-8",
                           keep_default_na=False)
    except ValueError as e:
        raise SchemaError(path, _bad_column(path, dtypes), "cannot be parsed: {}".format(e)) from None


def _bad_column(path, dtypes):
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    for name, dtype in dtypes.items():
        try:
            raw[name].astype(dtype)
        except ValueError:
            return name
    return "?"


def write_trajectories(trajectories: List[Trajectory], path) -> Path:
    frames = []
    for traj in trajectories:
        frame = pd.DataFrame(np.column_stack([traj.times, traj.positions, traj.velocities]),
                             columns=TRAJECTORY_COLUMNS[1:])
        frame.insert(0, "traj_id", np.full(len(traj), traj.traj_id, dtype=np.int64))
        frames.append(frame)
    return write_csv(pd.concat(frames, ignore_index=True), path)


def read_trajectories(path) -> List[Trajectory]:
    '''
    Imports trajectories from a CSV with header ``traj_id,t,x,y,z,vx,vy,vz``.

    Rows of one trajectory may be interleaved with others; each trajectory
    must have strictly increasing timestamps.
    '''
    frame = read_csv(path, TRAJECTORY_COLUMNS, _TRAJECTORY_DTYPES)
    if frame.empty:
        raise DatasetError('{} holds no trajectory samples'.format(path))
    trajectories = []
    for traj_id, rows in frame.groupby("traj_id", sort=False):
        trajectories.append(Trajectory(
            int(traj_id),
            rows["t"].to_numpy(),
            rows[["x", "y", "z"]].to_numpy(),
            rows[["vx", "vy", "vz"]].to_numpy(),
        ))
    return trajectories


def _measurement_frame(seq: MeasurementSequence) -> pd.DataFrame:
    n = len(seq)
    columns = {"traj_id": np.full(n, seq.traj_id, dtype=np.int64), "t": seq.times}
    columns.update(zip(MEASUREMENT_VALUE_COLUMNS, seq.values.T))
    columns.update(zip(SIGMA_COLUMNS, seq.sigma_matrix.T))
    columns.update(tier=[seq.tier] * n, rate=np.full(n, seq.rate))
    return pd.DataFrame(columns, columns=MEASUREMENT_COLUMNS)


def write_measurements(sequences: List[MeasurementSequence], path) -> Path:
    return write_csv(pd.concat([_measurement_frame(s) for s in sequences], ignore_index=True), path)


def read_measurements(path) -> List[MeasurementSequence]:
    dtypes = {c: COLUMN_DTYPES[c] for c in MEASUREMENT_COLUMNS}
    frame = read_csv(path, MEASUREMENT_COLUMNS, dtypes)
    sequences = []
    for (traj_id, rate), rows in frame.groupby(["traj_id", "rate"], sort=False):
        sigmas = NoiseSigmas.from_vector(rows[SIGMA_COLUMNS].to_numpy()[0])
        sequences.append(MeasurementSequence(
            int(traj_id), rows["tier"].iloc[0], float(rate), None,
            rows["t"].to_numpy(), rows[MEASUREMENT_VALUE_COLUMNS].to_numpy(), sigmas,
        ))
    return sequences


def write_dataset(dataset: SupervisedDataset, path) -> Path:
    return write_csv(dataset.frame, path)


def read_dataset(path) -> SupervisedDataset:
    return SupervisedDataset(read_csv(path, DATASET_COLUMNS, COLUMN_DTYPES))


def write_manifest(data: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        yaml.safe_dump(data, fp, sort_keys=False, default_flow_style=False)
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        return {}
    with open(path, encoding="utf-8") as fp:
        return yaml.safe_load(fp) or {}
