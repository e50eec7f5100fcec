import numpy as np

from ..geom import (
    ANGULAR_CHANNELS,
    GaussianEstimate,
    NoiseSigmas,
    SensorPose,
    SphericalMeasurement,
    checked_solve,
    ensure_psd,
    measurement_jacobian,
    radar_measurement,
    wrap_angle,
)
from .motion import TrackState


__all__ = (
    "measurement_residual",
    "kalman_update",
    "ekf_update",
)


def measurement_residual(z, z_pred, angular=ANGULAR_CHANNELS) -> np.ndarray:
    """``z - z_pred`` with the listed channels wrapped into ``(-pi, pi]``."""
    nu = np.asarray(z, dtype=float) - np.asarray(z_pred, dtype=float)
    for channel in angular:
        nu[..., channel] = wrap_angle(nu[..., channel])
    return nu


def kalman_update(predicted: TrackState, z, R, h, H, angular=()) -> TrackState:
    '''
    Linearised (extended) Kalman correction for an arbitrary measurement model.

    Parameters
    ----------
    predicted : TrackState
    z : array-like
        the measurement
    R : np.ndarray
        measurement noise covariance
    h : callable
        measurement function evaluated at the predicted mean
    H : np.ndarray
        Jacobian of ``h`` at the predicted mean
    angular : tuple
        measurement channels whose innovation is angle-wrapped

    Raises
    ------
    SingularMatrixError
        the innovation covariance cannot be inverted
    '''
    x = predicted.mean
    P = predicted.covariance
    nu = measurement_residual(z, h(x), angular)
    S = H @ P @ H.T + R
    # K = P H^T S^-1, solved rather than inverted
    K = checked_solve(S, H @ P, "innovation covariance").T
    mean = x + K @ nu
    cov = (np.eye(len(x)) - K @ H) @ P
    return TrackState(GaussianEstimate(mean, ensure_psd(cov, "EKF posterior")), predicted.timestamp)


def ekf_update(predicted: TrackState, meas: SphericalMeasurement, sigmas: NoiseSigmas,
               sensor: SensorPose) -> TrackState:
    '''
    EKF correction with a radar ``(range, bearing, elevation, range_rate)``
    measurement. Bearing and elevation innovations are angle-wrapped.
    '''
    H = measurement_jacobian(predicted.mean, sensor)
    return kalman_update(
        predicted,
        meas.as_vector(),
        sigmas.covariance(),
        lambda x: radar_measurement(x, sensor),
        H,
        angular=ANGULAR_CHANNELS,
    )
