from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from ..errors import FilterError
from ..geom import GaussianEstimate, ensure_psd


__all__ = (
    "TrackState",
    "ProcessModel",
    "cv_predict",
)


@dataclass
class TrackState:
    """
    A filter's belief over the interleaved 6-D state at ``timestamp``.

    Attributes
    ----------
    estimate : GaussianEstimate
        mean ``(x, vx, y, vy, z, vz)`` and its 6 x 6 covariance
    timestamp : float
        seconds
    """
    estimate: GaussianEstimate
    timestamp: float

    @property
    def mean(self):
        return self.estimate.mean

    @property
    def covariance(self):
        return self.estimate.covariance


@dataclass(frozen=True)
class ProcessModel:
    '''
    Constant-velocity motion with per-axis white-noise acceleration.

    Parameters
    ----------
    accel_intensity : float
        continuous acceleration noise intensity ``q``, (m/s^2)^2 per axis
        (more precisely m^2/s^3)
    '''
    accel_intensity: float = 1.0

    def __post_init__(self):
        if not self.accel_intensity >= 0:
            raise FilterError('accel_intensity must be non-negative, got {}'.format(self.accel_intensity))

    def transition(self, dt: float) -> np.ndarray:
        block = np.array([[1.0, dt], [0.0, 1.0]])
        return block_diag(block, block, block)

    def noise(self, dt: float) -> np.ndarray:
        q = self.accel_intensity
        block = q * np.array([
            [dt ** 3 / 3.0, dt ** 2 / 2.0],
            [dt ** 2 / 2.0, dt],
        ])
        return block_diag(block, block, block)


def _check_dt(dt):
    if not dt > 0:
        raise FilterError('time step must be positive, got {}'.format(dt))


def cv_predict(track: TrackState, dt: float, model: ProcessModel) -> TrackState:
    '''
    Propagates a track over ``dt`` seconds, no control input.

    Raises
    ------
    FilterError
        ``dt <= 0``
    '''
    _check_dt(dt)
    F = model.transition(dt)
    mean = F @ track.mean
    cov = F @ track.covariance @ F.T + model.noise(dt)
    return TrackState(GaussianEstimate(mean, ensure_psd(cov, "predicted covariance")),
                      track.timestamp + dt)
