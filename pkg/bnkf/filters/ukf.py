from dataclasses import dataclass

import numpy as np

from ..errors import FilterError
from ..geom import (
    ANGULAR_CHANNELS,
    GaussianEstimate,
    NoiseSigmas,
    SensorPose,
    SphericalMeasurement,
    checked_solve,
    ensure_psd,
    radar_measurement,
    safe_cholesky,
)
from .ekf import measurement_residual
from .motion import ProcessModel, TrackState, _check_dt


__all__ = (
    "SigmaPointSet",
    "make_sigma_points",
    "ukf_predict",
    "unscented_update",
    "ukf_update",
)


@dataclass
class SigmaPointSet:
    """
    The ``2n+1`` points and weights of a symmetric unscented transform.

    Attributes
    ----------
    points : np.ndarray
        shape ``(2n+1, n)``; row 0 is the mean
    mean_weights : np.ndarray
    cov_weights : np.ndarray
    kappa : float
    """
    points: np.ndarray
    mean_weights: np.ndarray
    cov_weights: np.ndarray
    kappa: float

    def mean(self) -> np.ndarray:
        return self.mean_weights @ self.points

    def covariance(self) -> np.ndarray:
        resid = self.points - self.mean()
        return (self.cov_weights[:, None] * resid).T @ resid


def make_sigma_points(estimate: GaussianEstimate, kappa: float = 0.0) -> SigmaPointSet:
    '''
    Julier's symmetric sigma-point set.

    ``chi_0 = mean``, ``chi_i = mean +/- column_i(L)`` with ``L`` the lower
    Cholesky factor of ``(n + kappa) P``. Weights ``kappa / (n + kappa)``
    for the centre and ``1 / (2 (n + kappa))`` elsewhere, identical for
    mean and covariance.

    Raises
    ------
    FilterError
        ``n + kappa <= 0``
    CovarianceError
        the factorization fails even after jitter repair
    '''
    n = estimate.dim
    if not n + kappa > 0:
        raise FilterError('sigma-point spread n + kappa must be positive (n={}, kappa={})'.format(n, kappa))
    L = safe_cholesky((n + kappa) * estimate.covariance, "sigma-point covariance")
    points = np.empty((2 * n + 1, n))
    points[0] = estimate.mean
    points[1:n + 1] = estimate.mean + L.T
    points[n + 1:] = estimate.mean - L.T
    weights = np.full(2 * n + 1, 1.0 / (2.0 * (n + kappa)))
    weights[0] = kappa / (n + kappa)
    return SigmaPointSet(points, weights, weights.copy(), float(kappa))


def ukf_predict(track: TrackState, dt: float, model: ProcessModel, kappa: float = 0.0) -> TrackState:
    """Unscented prediction through the constant-velocity transition."""
    _check_dt(dt)
    sigma = make_sigma_points(track.estimate, kappa)
    F = model.transition(dt)
    propagated = SigmaPointSet(sigma.points @ F.T, sigma.mean_weights, sigma.cov_weights, kappa)
    cov = propagated.covariance() + model.noise(dt)
    return TrackState(
        GaussianEstimate(propagated.mean(), ensure_psd(cov, "UKF predicted covariance")),
        track.timestamp + dt,
    )


def _angular_mean(values, weights):
    return np.arctan2(weights @ np.sin(values), weights @ np.cos(values))


def unscented_update(predicted: TrackState, z, R, h, kappa: float = 0.0, angular=()) -> TrackState:
    '''
    Sigma-point Kalman correction for an arbitrary measurement function.

    Angular channels are averaged as unit phasors and their residuals are
    wrapped, so a bearing seam at +/-pi never produces a 2 pi innovation.

    Parameters
    ----------
    predicted : TrackState
    z : array-like
    R : np.ndarray
    h : callable
        maps a stack of states ``(k, n)`` to measurements ``(k, m)``
    kappa : float
    angular : tuple
        angle-valued measurement channels

    Raises
    ------
    SingularMatrixError
        the innovation covariance ``P_zz`` cannot be inverted
    '''
    sigma = make_sigma_points(predicted.estimate, kappa)
    Z = np.atleast_2d(h(sigma.points))
    wm, wc = sigma.mean_weights, sigma.cov_weights

    z_pred = wm @ Z
    for channel in angular:
        z_pred[channel] = _angular_mean(Z[:, channel], wm)

    dz = measurement_residual(Z, z_pred, angular)
    dx = sigma.points - predicted.mean
    P_zz = (wc[:, None] * dz).T @ dz + R
    P_xz = (wc[:, None] * dx).T @ dz

    K = checked_solve(P_zz, P_xz.T, "innovation covariance P_zz").T
    nu = measurement_residual(z, z_pred, angular)
    mean = predicted.mean + K @ nu
    cov = predicted.covariance - K @ P_zz @ K.T
    return TrackState(GaussianEstimate(mean, ensure_psd(cov, "UKF posterior")), predicted.timestamp)


def ukf_update(predicted: TrackState, meas: SphericalMeasurement, sigmas: NoiseSigmas,
               sensor: SensorPose, kappa: float = 0.0) -> TrackState:
    return unscented_update(
        predicted,
        meas.as_vector(),
        sigmas.covariance(),
        lambda points: radar_measurement(points, sensor),
        kappa=kappa,
        angular=ANGULAR_CHANNELS,
    )
