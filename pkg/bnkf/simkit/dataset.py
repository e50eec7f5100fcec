from dataclasses import dataclass
from typing import Iterable, Iterator, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline

from ..bnn import feature_matrix
from ..errors import DatasetError
from ..seeding import make_rng
from .measurements import MeasurementSequence
from .trajectory import Trajectory


__all__ = (
    "MEASUREMENT_VALUE_COLUMNS",
    "SIGMA_COLUMNS",
    "TARGET_COLUMNS",
    "MEASUREMENT_COLUMNS",
    "DATASET_COLUMNS",
    "UNASSIGNED_FOLD",
    "truth_at",
    "PairTable",
    "SupervisedDataset",
    "build_supervised",
    "assign_folds",
)


MEASUREMENT_VALUE_COLUMNS = ["range", "bearing", "elevation", "range_rate"]
SIGMA_COLUMNS = ["sigma_range", "sigma_bearing", "sigma_elevation", "sigma_range_rate"]
TARGET_COLUMNS = ["tx", "ty", "tz"]
MEASUREMENT_COLUMNS = ["traj_id", "t"] + MEASUREMENT_VALUE_COLUMNS + SIGMA_COLUMNS + ["tier", "rate"]
DATASET_COLUMNS = MEASUREMENT_COLUMNS + TARGET_COLUMNS + ["fold"]

UNASSIGNED_FOLD = -1

COLUMN_DTYPES = dict(
    {name: float for name in ["t"] + MEASUREMENT_VALUE_COLUMNS + SIGMA_COLUMNS + TARGET_COLUMNS + ["rate"]},
    traj_id="int64",
    tier=str,
    fold="int64",
)


def truth_at(traj: Trajectory, times) -> np.ndarray:
    '''
    True positions at arbitrary timestamps.

    Timestamps that coincide with a trajectory sample return it exactly;
    anything else is a cubic Hermite interpolation on positions and
    velocities.

    Raises
    ------
    DatasetError
        a timestamp lies outside the trajectory
    '''
    times = np.asarray(times, dtype=float)
    if np.any(times < traj.times[0]) or np.any(times > traj.times[-1]):
        raise DatasetError('trajectory {}: timestamps outside [{}, {}]'.format(
            traj.traj_id, traj.times[0], traj.times[-1]))
    idx = np.clip(np.searchsorted(traj.times, times), 0, len(traj) - 1)
    aligned = traj.times[idx] == times
    out = np.empty((len(times), 3))
    out[aligned] = traj.positions[idx[aligned]]
    if not np.all(aligned):
        spline = CubicHermiteSpline(traj.times, traj.positions, traj.velocities, axis=0)
        out[~aligned] = spline(times[~aligned])
    return out


@dataclass
class PairTable:
    """
    Network-ready pairs of consecutive returns.

    Attributes
    ----------
    features : np.ndarray
        ``(N, 12)`` feature rows
    targets : np.ndarray
        ``(N, 3)`` true positions at the later return
    traj_ids, rates, folds, times : np.ndarray
        per-row sequence keys; ``times`` are the later return's timestamps
    step : np.ndarray
        index of the pair inside its sequence, 0 for the first pair
    """
    features: np.ndarray
    targets: np.ndarray
    traj_ids: np.ndarray
    rates: np.ndarray
    folds: np.ndarray
    times: np.ndarray
    step: np.ndarray

    def __len__(self):
        return len(self.features)

    def select(self, mask) -> "PairTable":
        return PairTable(*(getattr(self, name)[mask] for name in self.__dataclass_fields__))


class SupervisedDataset:
    """
    Measurement-level table of retained returns with their truth and fold.

    One row per return, columns :data:`DATASET_COLUMNS`. Rows of one
    ``(traj_id, rate)`` sequence are contiguous and time-ordered;
    :meth:`pairs` turns consecutive rows into network examples.

    Parameters
    ----------
    frame : pandas.DataFrame
    """
    def __init__(self, frame: pd.DataFrame):
        missing = [c for c in DATASET_COLUMNS if c not in frame.columns]
        if missing:
            raise DatasetError('dataset frame lacks columns {}'.format(missing))
        self.frame = frame[DATASET_COLUMNS].reset_index(drop=True).astype(COLUMN_DTYPES)

    def __repr__(self):
        return '<SupervisedDataset rows={} trajectories={}>'.format(len(self), len(self.trajectory_ids))

    def __len__(self):
        return len(self.frame)

    def __eq__(self, other):
        return isinstance(other, SupervisedDataset) and self.frame.equals(other.frame)

    @classmethod
    def concat(cls, datasets: Iterable["SupervisedDataset"]) -> "SupervisedDataset":
        frames = [d.frame for d in datasets]
        if not frames:
            return cls(pd.DataFrame({c: pd.Series(dtype=COLUMN_DTYPES[c]) for c in DATASET_COLUMNS}))
        return cls(pd.concat(frames, ignore_index=True))

    @property
    def trajectory_ids(self) -> np.ndarray:
        return np.unique(self.frame["traj_id"].to_numpy())

    @property
    def tiers(self):
        return sorted(self.frame["tier"].unique())

    @property
    def rates(self):
        return sorted(self.frame["rate"].unique(), reverse=True)

    def select_folds(self, folds, exclude: bool = False) -> "SupervisedDataset":
        mask = self.frame["fold"].isin(list(folds))
        return SupervisedDataset(self.frame[~mask if exclude else mask])

    def sequences(self) -> Iterator[Tuple[Tuple[int, float], pd.DataFrame]]:
        """``((traj_id, rate), rows)`` per sequence, in order of first appearance."""
        yield from self.frame.groupby(["traj_id", "rate"], sort=False)

    def pairs(self) -> PairTable:
        frame = self.frame
        traj = frame["traj_id"].to_numpy()
        rate = frame["rate"].to_numpy()
        t = frame["t"].to_numpy()
        same = (traj[1:] == traj[:-1]) & (rate[1:] == rate[:-1])
        if np.any(same & (t[1:] <= t[:-1])):
            raise DatasetError('dataset rows are not time-ordered within their sequences')
        later = np.flatnonzero(same) + 1
        z = frame[MEASUREMENT_VALUE_COLUMNS].to_numpy()
        sig = frame[SIGMA_COLUMNS].to_numpy()
        step = frame.groupby(["traj_id", "rate"], sort=False).cumcount().to_numpy() - 1
        return PairTable(
            features=feature_matrix(z[later - 1], z[later], sig[later]),
            targets=frame[TARGET_COLUMNS].to_numpy()[later],
            traj_ids=traj[later],
            rates=rate[later],
            folds=frame["fold"].to_numpy()[later],
            times=t[later],
            step=step[later],
        )


def build_supervised(seq: MeasurementSequence, traj: Trajectory) -> SupervisedDataset:
    '''
    Joins a measurement sequence with the truth of its trajectory.

    Each return carries the true position at its own timestamp, so the
    pair ``(t, t+1)`` of :meth:`SupervisedDataset.pairs` targets the
    position at ``t+1``.

    Raises
    ------
    DatasetError
        fewer than 2 returns, or the sequence belongs to another trajectory
    '''
    if len(seq) < 2:
        raise DatasetError('a supervised sequence needs at least 2 measurements, got {}'.format(len(seq)))
    if seq.traj_id != traj.traj_id:
        raise DatasetError('sequence of trajectory {} joined with trajectory {}'.format(
            seq.traj_id, traj.traj_id))
    n = len(seq)
    truth = truth_at(traj, seq.times)
    columns = {"traj_id": np.full(n, seq.traj_id, dtype=np.int64), "t": seq.times}
    columns.update(zip(MEASUREMENT_VALUE_COLUMNS, seq.values.T))
    columns.update(zip(SIGMA_COLUMNS, seq.sigma_matrix.T))
    columns.update(tier=[seq.tier] * n, rate=np.full(n, seq.rate))
    columns.update(zip(TARGET_COLUMNS, truth.T))
    columns["fold"] = np.full(n, UNASSIGNED_FOLD, dtype=np.int64)
    return SupervisedDataset(pd.DataFrame(columns))


def assign_folds(dataset: SupervisedDataset, k: int = 5, seed=0) -> SupervisedDataset:
    '''
    Trajectory-level partition into ``k`` folds whose sizes differ by at
    most one trajectory.

    Raises
    ------
    DatasetError
        fewer distinct trajectories than folds
    '''
    ids = dataset.trajectory_ids
    if len(ids) < k:
        raise DatasetError('{} trajectories cannot fill {} folds'.format(len(ids), k))
    order = make_rng(seed).permutation(len(ids))
    fold_of = {int(ids[j]): pos % k for pos, j in enumerate(order)}
    frame = dataset.frame.copy()
    frame["fold"] = frame["traj_id"].map(fold_of).astype("int64")
    return SupervisedDataset(frame)
