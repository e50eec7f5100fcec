from dataclasses import dataclass, field
from typing import Optional

import numpy as np


__all__ = (
    "STATE_DIM",
    "POSITION_INDEX",
    "VELOCITY_INDEX",
    "ANGULAR_CHANNELS",
    "SensorPose",
    "KinematicState",
    "SphericalMeasurement",
    "NoiseSigmas",
    "GaussianEstimate",
)


STATE_DIM = 6
# State vectors interleave position and velocity per axis: (x, vx, y, vy, z, vz)
POSITION_INDEX = np.array([0, 2, 4])
VELOCITY_INDEX = np.array([1, 3, 5])
# Measurement vectors are (range, bearing, elevation, range_rate)
ANGULAR_CHANNELS = (1, 2)


def _vector(value, size, name):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise ValueError('{} must have {} components, got shape {}'.format(name, size, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise ValueError('{} must be finite, got {}'.format(name, arr))
    return arr


@dataclass(frozen=True)
class SensorPose:
    """
    Fixed radar location, meters.

    Parameters
    ----------
    position : array-like
        the sensor's Cartesian position ``(x, y, z)``
    """
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "position", _vector(self.position, 3, "sensor position"))

    def to_dict(self):
        return {"position": [float(v) for v in self.position]}

    @classmethod
    def from_dict(cls, data: dict):
        return SensorPose(data["position"])


@dataclass(frozen=True)
class KinematicState:
    """
    Cartesian position and velocity of a target at one instant.

    Parameters
    ----------
    timestamp : float
        seconds
    position : array-like
        meters
    velocity : array-like
        meters/second
    """
    timestamp: float
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "timestamp", float(self.timestamp))
        object.__setattr__(self, "position", _vector(self.position, 3, "position"))
        object.__setattr__(self, "velocity", _vector(self.velocity, 3, "velocity"))

    def as_vector(self) -> np.ndarray:
        vec = np.empty(STATE_DIM)
        vec[POSITION_INDEX] = self.position
        vec[VELOCITY_INDEX] = self.velocity
        return vec

    @classmethod
    def from_vector(cls, vector, timestamp: float = 0.0):
        vector = _vector(vector, STATE_DIM, "state vector")
        return KinematicState(timestamp, vector[POSITION_INDEX], vector[VELOCITY_INDEX])


@dataclass(frozen=True)
class SphericalMeasurement:
    """
    A radar return relative to the sensor.

    Parameters
    ----------
    range : float
        meters, strictly positive
    bearing : float
        radians in ``(-pi, pi]``, measured from +x toward +y
    elevation : float
        radians in ``[-pi/2, pi/2]``, measured from the horizontal plane
    range_rate : float
        meters/second
    timestamp : float
        seconds
    """
    range: float
    bearing: float
    elevation: float
    range_rate: float
    timestamp: float = 0.0

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError('range must be positive, got {}'.format(self.range))
        if not -np.pi < self.bearing <= np.pi:
            raise ValueError('bearing {} outside (-pi, pi]'.format(self.bearing))
        if not -np.pi / 2 <= self.elevation <= np.pi / 2:
            raise ValueError('elevation {} outside [-pi/2, pi/2]'.format(self.elevation))

    def as_vector(self) -> np.ndarray:
        return np.array([self.range, self.bearing, self.elevation, self.range_rate])

    @classmethod
    def from_vector(cls, vector, timestamp: float = 0.0):
        r, b, e, rr = (float(v) for v in vector)
        return SphericalMeasurement(r, b, e, rr, float(timestamp))


@dataclass(frozen=True)
class NoiseSigmas:
    """
    Per-channel measurement noise standard deviations, angles in radians.

    Use :meth:`from_degrees` for tables quoted in degrees; the conversion
    happens once there.
    """
    range: float
    range_rate: float
    bearing: float
    elevation: float

    def __post_init__(self):
        for name in ("range", "range_rate", "bearing", "elevation"):
            value = float(getattr(self, name))
            if not value > 0 or not np.isfinite(value):
                raise ValueError('sigma_{} must be strictly positive, got {}'.format(name, value))
            object.__setattr__(self, name, value)

    @classmethod
    def from_degrees(cls, range, range_rate, bearing_deg, elevation_deg):
        return NoiseSigmas(range, range_rate, np.radians(bearing_deg), np.radians(elevation_deg))

    @classmethod
    def from_vector(cls, vector):
        r, b, e, rr = (float(v) for v in vector)
        return NoiseSigmas(range=r, range_rate=rr, bearing=b, elevation=e)

    def as_vector(self) -> np.ndarray:
        """Sigmas in measurement-vector order ``(range, bearing, elevation, range_rate)``."""
        return np.array([self.range, self.bearing, self.elevation, self.range_rate])

    def covariance(self) -> np.ndarray:
        return np.diag(self.as_vector() ** 2)

    def scaled(self, factor: float):
        return NoiseSigmas(self.range * factor, self.range_rate * factor,
                           self.bearing * factor, self.elevation * factor)


@dataclass
class GaussianEstimate:
    """
    Mean vector and covariance matrix, the output of every estimator.

    Parameters
    ----------
    mean : array-like
        n-vector
    covariance : array-like
        n x n matrix, symmetric positive semi-definite
    """
    mean: np.ndarray
    covariance: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.covariance = np.asarray(self.covariance, dtype=float)
        n = self.mean.shape[0]
        if self.covariance.shape != (n, n):
            raise ValueError('covariance shape {} does not match mean dimension {}'.format(
                self.covariance.shape, n))
        scale = max(float(np.max(np.abs(self.covariance))), 1.0)
        if np.max(np.abs(self.covariance - self.covariance.T)) > 1e-9 * scale:
            raise ValueError('covariance is not symmetric')

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def position_block(self):
        """The 3-D position marginal of a 6-D interleaved state estimate."""
        if self.dim == 3:
            return self
        idx = POSITION_INDEX
        return GaussianEstimate(self.mean[idx], self.covariance[np.ix_(idx, idx)])
