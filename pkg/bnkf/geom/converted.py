import numpy as np

from .covariance import ensure_psd_batch
from .transforms import cartesian_from_spherical
from .types import GaussianEstimate, NoiseSigmas, SensorPose, SphericalMeasurement


__all__ = (
    "converted_position_measurement",
    "converted_position_measurement_batch",
)


def converted_position_measurement_batch(measurements, sigmas, sensor: SensorPose, kappa: float = 0.0):
    '''
    Vectorised :func:`converted_position_measurement`.

    Parameters
    ----------
    measurements : array-like
        shape ``(N, 4)`` (or ``(N, 3)``) in measurement order
        ``(range, bearing, elevation[, range_rate])``
    sigmas : array-like
        shape ``(4,)`` or ``(N, 4)`` in the same order, radians for angles
    sensor : SensorPose
    kappa : float
        unscented spread over the three spherical channels, ``3 + kappa > 0``

    Returns
    -------
    means : np.ndarray
        shape ``(N, 3)``, the direct conversion of each measurement
    covariances : np.ndarray
        shape ``(N, 3, 3)``, unscented propagation of the spherical noise
    '''
    z = np.atleast_2d(np.asarray(measurements, dtype=float))[:, :3]
    sig = np.broadcast_to(np.asarray(sigmas, dtype=float)[..., :3], z.shape)
    n = 3
    spread = np.sqrt(n + kappa)

    # (N, 2n+1, 3) sigma points on a diagonal spherical covariance
    offsets = np.zeros((2 * n + 1, n))
    offsets[1:n + 1] = np.eye(n)
    offsets[n + 1:] = -np.eye(n)
    points = z[:, None, :] + spread * offsets[None, :, :] * sig[:, None, :]
    weights = np.full(2 * n + 1, 1.0 / (2.0 * (n + kappa)))
    weights[0] = kappa / (n + kappa)

    cart = cartesian_from_spherical(points[..., 0], points[..., 1], points[..., 2], sensor)
    ut_mean = np.einsum("k,nkj->nj", weights, cart)
    resid = cart - ut_mean[:, None, :]
    cov = np.einsum("k,nki,nkj->nij", weights, resid, resid)
    cov = ensure_psd_batch(cov, "converted measurement")

    means = cartesian_from_spherical(z[:, 0], z[:, 1], z[:, 2], sensor)
    return means, cov


def converted_position_measurement(meas: SphericalMeasurement, sigmas: NoiseSigmas,
                                   sensor: SensorPose, kappa: float = 0.0) -> GaussianEstimate:
    '''
    Converts a spherical measurement into a Cartesian position
    pseudo-measurement.

    The mean is the direct conversion of the measured range and angles; the
    3 x 3 covariance propagates ``diag(sigma_range, sigma_bearing,
    sigma_elevation)**2`` through the conversion with a 7-point unscented
    transform.

    Raises
    ------
    CovarianceError
        the propagated covariance is not PSD even after jitter repair
    '''
    means, covs = converted_position_measurement_batch(
        meas.as_vector()[None, :], sigmas.as_vector(), sensor, kappa
    )
    return GaussianEstimate(means[0], covs[0])
