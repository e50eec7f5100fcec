from dataclasses import dataclass, replace

import numpy as np

from ..errors import DatasetError
from ..geom import NoiseSigmas, SensorPose, SphericalMeasurement, spherical_from_cartesian, wrap_angle
from ..seeding import make_rng
from .trajectory import Trajectory


__all__ = (
    "TIER_TABLE_DEGREES",
    "NOISE_TIERS",
    "SAMPLING_RATES",
    "tier_sigmas",
    "MeasurementSequence",
    "simulate_measurements",
    "downsample",
    "retained_count",
)


# tier -> (sigma_range m, sigma_range_rate m/s, sigma_bearing deg, sigma_elevation deg)
TIER_TABLE_DEGREES = {
    "low": (1.0, 0.01, 0.001, 0.001),
    "medium": (10.0, 0.1, 0.01, 0.01),
    "high": (100.0, 1.0, 0.1, 0.1),
}
NOISE_TIERS = {name: NoiseSigmas.from_degrees(*row) for name, row in TIER_TABLE_DEGREES.items()}
SAMPLING_RATES = (1.0, 0.75, 0.5)

# smallest range a noisy draw is clamped to, meters
MIN_RANGE = 1e-3


def tier_sigmas(tier: str) -> NoiseSigmas:
    try:
        return NOISE_TIERS[tier]
    except KeyError:
        raise DatasetError('Unknown noise tier <{}>, expected one of {}'.format(
            tier, ", ".join(NOISE_TIERS))) from None


@dataclass
class MeasurementSequence:
    """
    Radar returns of one trajectory at one noise tier and sampling rate.

    Attributes
    ----------
    traj_id : int
    tier : str
    rate : float
        retained fraction of the full-rate sequence
    seed : int
        noise seed
    times : np.ndarray
        shape ``(N,)``
    values : np.ndarray
        shape ``(N, 4)`` in measurement order
    sigmas : NoiseSigmas
    indices : np.ndarray
        positions of the retained returns in the full-rate sequence
    """
    traj_id: int
    tier: str
    rate: float
    seed: int
    times: np.ndarray
    values: np.ndarray
    sigmas: NoiseSigmas
    indices: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float).reshape(-1, 4)
        if self.indices is None:
            self.indices = np.arange(len(self.times))

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for t, z in zip(self.times, self.values):
            yield SphericalMeasurement.from_vector(z, t), self.sigmas

    @property
    def sigma_matrix(self) -> np.ndarray:
        return np.tile(self.sigmas.as_vector(), (len(self), 1))


def _reflect_over_poles(values: np.ndarray):
    """Folds noisy elevations back over a pole and turns their bearing by pi."""
    elevation = wrap_angle(values[:, 2])
    beyond = np.abs(elevation) > np.pi / 2
    elevation[beyond] = np.copysign(np.pi, elevation[beyond]) - elevation[beyond]
    values[:, 2] = elevation
    values[beyond, 1] += np.pi
    values[:, 1] = wrap_angle(values[:, 1])


def simulate_measurements(traj: Trajectory, sensor: SensorPose, tier, seed,
                          add_noise: bool = True) -> MeasurementSequence:
    '''
    Noisy radar returns for every sample of a trajectory.

    Parameters
    ----------
    traj : Trajectory
    sensor : SensorPose
    tier : str | NoiseSigmas
        ``low``, ``medium``, ``high`` or explicit sigmas (tagged ``custom``)
    seed : int
    add_noise : bool
        ``False`` returns the exact noise-free measurements, still tagged
        with the tier's sigmas

    Raises
    ------
    DatasetError
        unknown tier
    GeometryError
        a sample coincides with the sensor
    '''
    if isinstance(tier, NoiseSigmas):
        sigmas, tag = tier, "custom"
    else:
        sigmas, tag = tier_sigmas(tier), tier
    clean = spherical_from_cartesian(traj.positions, traj.velocities, sensor)
    values = clean.copy()
    if add_noise:
        rng = make_rng(seed)
        values += rng.standard_normal(clean.shape) * sigmas.as_vector()
        values[:, 0] = np.maximum(values[:, 0], MIN_RANGE)
        _reflect_over_poles(values)
    return MeasurementSequence(traj.traj_id, tag, 1.0, int(seed), traj.times.copy(), values, sigmas)


def retained_count(n: int, rate: float) -> int:
    """``round(rate * n)`` with halves rounded up, never below 2."""
    return max(2, min(n, int(np.floor(rate * n + 0.5))))


def downsample(seq: MeasurementSequence, rate: float, seed) -> MeasurementSequence:
    '''
    Random retention of a fraction of the returns, order preserved.

    The first two returns are always kept; the rest of the quota is drawn
    uniformly without replacement.

    Raises
    ------
    DatasetError
        fewer than 4 returns, or ``rate`` outside ``(0, 1]``
    '''
    n = len(seq)
    if n < 4:
        raise DatasetError('downsampling needs at least 4 measurements, got {}'.format(n))
    if not 0 < rate <= 1:
        raise DatasetError('sampling rate must lie in (0, 1], got {}'.format(rate))
    target = retained_count(n, rate)
    if target == n:
        keep = np.arange(n)
    else:
        rng = make_rng(seed)
        drawn = rng.choice(np.arange(2, n), size=target - 2, replace=False)
        keep = np.concatenate([[0, 1], np.sort(drawn)])
    return replace(
        seq,
        rate=float(rate),
        times=seq.times[keep],
        values=seq.values[keep],
        indices=seq.indices[keep],
    )
