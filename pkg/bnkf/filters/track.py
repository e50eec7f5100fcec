from typing import List

import numpy as np

from ..errors import FilterError
from ..geom import (
    POSITION_INDEX,
    STATE_DIM,
    VELOCITY_INDEX,
    GaussianEstimate,
    NoiseSigmas,
    SensorPose,
    SphericalMeasurement,
    converted_position_measurement,
    ensure_psd,
)
from .ekf import ekf_update
from .motion import ProcessModel, TrackState, cv_predict
from .ukf import ukf_predict, ukf_update


__all__ = (
    "initialize_from_positions",
    "initialize_track",
    "RadarTracker",
    "ExtendedRadarTracker",
    "UnscentedRadarTracker",
)


def initialize_from_positions(p1, R1, p2, R2, dt: float, timestamp: float = 0.0) -> TrackState:
    '''
    Two-point differencing initializer on Cartesian position fixes.

    Position is ``p2`` with covariance ``R2``; velocity is
    ``(p2 - p1) / dt`` with covariance ``(R1 + R2) / dt**2``; the
    position/velocity cross-covariance is ``R2 / dt``.

    Raises
    ------
    FilterError
        ``dt <= 0``
    '''
    if not dt > 0:
        raise FilterError('initialization needs increasing timestamps, got dt={}'.format(dt))
    p1, p2 = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    R1, R2 = np.asarray(R1, dtype=float), np.asarray(R2, dtype=float)
    mean = np.empty(STATE_DIM)
    mean[POSITION_INDEX] = p2
    mean[VELOCITY_INDEX] = (p2 - p1) / dt
    cov = np.empty((STATE_DIM, STATE_DIM))
    pos, vel = np.ix_(POSITION_INDEX, POSITION_INDEX), np.ix_(VELOCITY_INDEX, VELOCITY_INDEX)
    cov[pos] = R2
    cov[vel] = (R1 + R2) / dt ** 2
    cov[np.ix_(POSITION_INDEX, VELOCITY_INDEX)] = R2 / dt
    cov[np.ix_(VELOCITY_INDEX, POSITION_INDEX)] = R2.T / dt
    return TrackState(GaussianEstimate(mean, ensure_psd(cov, "initial covariance")), float(timestamp))


def initialize_track(m1: SphericalMeasurement, m2: SphericalMeasurement,
                     sigmas: NoiseSigmas, sensor: SensorPose) -> TrackState:
    '''
    Starts a track from the first two measurements of a sequence.

    Both measurements go through
    :func:`~bnkf.geom.converted_position_measurement`; the track is
    stamped with ``m2.timestamp``.

    Raises
    ------
    FilterError
        ``m2.timestamp <= m1.timestamp``
    '''
    dt = m2.timestamp - m1.timestamp
    if not dt > 0:
        raise FilterError('initialization needs increasing timestamps, got dt={}'.format(dt))
    z1 = converted_position_measurement(m1, sigmas, sensor)
    z2 = converted_position_measurement(m2, sigmas, sensor)
    return initialize_from_positions(z1.mean, z1.covariance, z2.mean, z2.covariance, dt, m2.timestamp)


def _sigma_rows(sigmas, n):
    if isinstance(sigmas, NoiseSigmas):
        return [sigmas] * n
    arr = np.asarray(sigmas, dtype=float)
    if arr.ndim == 1:
        return [NoiseSigmas.from_vector(arr)] * n
    return [NoiseSigmas.from_vector(row) for row in arr]


class RadarTracker:
    """
    Recursive single-target radar tracker: initialize, then predict over the
    actual time gap and update, once per measurement.

    One instance tracks one target.

    Parameters
    ----------
    sensor : SensorPose
    process_model : ProcessModel
    """
    method = None

    def __init__(self, sensor: SensorPose, process_model: ProcessModel = None):
        self.sensor = sensor
        self.process_model = process_model or ProcessModel()
        self.state = None

    def __repr__(self):
        return '<{} q={}>'.format(type(self).__name__, self.process_model.accel_intensity)

    def predict(self, track: TrackState, dt: float) -> TrackState:
        raise NotImplementedError

    def update(self, predicted: TrackState, meas: SphericalMeasurement, sigmas: NoiseSigmas) -> TrackState:
        raise NotImplementedError

    def initialize(self, m1: SphericalMeasurement, m2: SphericalMeasurement, sigmas: NoiseSigmas) -> TrackState:
        self.state = initialize_track(m1, m2, sigmas, self.sensor)
        return self.state

    def step(self, meas: SphericalMeasurement, sigmas: NoiseSigmas) -> TrackState:
        '''
        Consumes one measurement.

        Raises
        ------
        FilterError
            the tracker was never initialized, or time does not advance
        '''
        if self.state is None:
            raise FilterError('{} must be initialized before it can step'.format(type(self).__name__))
        predicted = self.predict(self.state, meas.timestamp - self.state.timestamp)
        self.state = self.update(predicted, meas, sigmas)
        return self.state

    def run(self, measurements, timestamps, sigmas) -> List[TrackState]:
        '''
        Tracks a whole measurement sequence.

        Parameters
        ----------
        measurements : array-like
            shape ``(N, 4)`` in measurement order, ``N >= 2``
        timestamps : array-like
            shape ``(N,)``, strictly increasing
        sigmas : NoiseSigmas | array-like
            one set for the sequence or shape ``(N, 4)``

        Returns
        -------
        states : List[TrackState]
            ``N - 1`` states; ``states[i]`` is the estimate at measurement
            ``i + 1``, ``states[0]`` the two-point initialization
        '''
        z = np.asarray(measurements, dtype=float)
        t = np.asarray(timestamps, dtype=float)
        if len(z) < 2:
            raise FilterError('a radar track needs at least 2 measurements, got {}'.format(len(z)))
        rows = _sigma_rows(sigmas, len(z))
        meas = [SphericalMeasurement.from_vector(z[i], t[i]) for i in range(len(z))]
        states = [self.initialize(meas[0], meas[1], rows[1])]
        for i in range(2, len(z)):
            states.append(self.step(meas[i], rows[i]))
        return states


class ExtendedRadarTracker(RadarTracker):
    """Constant-velocity EKF with the analytic radar Jacobian."""
    method = "ekf"

    def predict(self, track, dt):
        return cv_predict(track, dt, self.process_model)

    def update(self, predicted, meas, sigmas):
        return ekf_update(predicted, meas, sigmas, self.sensor)


class UnscentedRadarTracker(RadarTracker):
    """
    Constant-velocity Julier UKF.

    Parameters
    ----------
    sensor : SensorPose
    process_model : ProcessModel
    kappa : float
        sigma-point spread, ``6 + kappa > 0``
    """
    method = "ukf"

    def __init__(self, sensor: SensorPose, process_model: ProcessModel = None, kappa: float = 0.0):
        super().__init__(sensor, process_model)
        self.kappa = kappa

    def predict(self, track, dt):
        return ukf_predict(track, dt, self.process_model, self.kappa)

    def update(self, predicted, meas, sigmas):
        return ukf_update(predicted, meas, sigmas, self.sensor, self.kappa)
