"""Spherical/Cartesian conversions and the radar measurement model."""

import numpy as np

from ..errors import GeometryError
from .types import (
    POSITION_INDEX,
    VELOCITY_INDEX,
    KinematicState,
    SensorPose,
    SphericalMeasurement,
)


__all__ = (
    "wrap_angle",
    "cart_to_spherical",
    "spherical_to_cart",
    "spherical_from_cartesian",
    "cartesian_from_spherical",
    "radar_measurement",
    "measurement_jacobian",
)


def wrap_angle(a):
    '''
    Wraps an angle (or array of angles) into ``(-pi, pi]``.

    ``-pi`` maps to ``pi``: the interval is closed at the top.
    '''
    wrapped = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def spherical_from_cartesian(positions, velocities, sensor: SensorPose) -> np.ndarray:
    '''
    Noise-free ``(range, bearing, elevation, range_rate)`` for arrays of
    positions and velocities.

    Parameters
    ----------
    positions : array-like
        shape ``(..., 3)``, meters
    velocities : array-like
        shape ``(..., 3)``, meters/second
    sensor : SensorPose

    Returns
    -------
    measurements : np.ndarray
        shape ``(..., 4)``
    '''
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    delta = positions - sensor.position
    dx, dy, dz = delta[..., 0], delta[..., 1], delta[..., 2]
    r_xy = np.hypot(dx, dy)
    rho = np.hypot(r_xy, dz)
    if np.any(rho == 0.0):
        bad = positions.reshape(-1, 3)[np.ravel(rho == 0.0)][0]
        raise GeometryError(bad, sensor.position)
    # Zenith: bearing is undefined, pinned to 0
    bearing = np.where(r_xy > 0.0, np.arctan2(dy, dx), 0.0)
    elevation = np.arctan2(dz, r_xy)
    range_rate = np.sum(delta * velocities, axis=-1) / rho
    return np.stack([rho, wrap_angle(bearing), elevation, range_rate], axis=-1)


def cartesian_from_spherical(rho, bearing, elevation, sensor: SensorPose) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    cos_el = np.cos(elevation)
    offset = np.stack([
        rho * cos_el * np.cos(bearing),
        rho * cos_el * np.sin(bearing),
        rho * np.sin(elevation),
    ], axis=-1)
    return sensor.position + offset


def cart_to_spherical(state: KinematicState, sensor: SensorPose) -> SphericalMeasurement:
    '''
    Converts a true state into the noise-free radar measurement.

    Raises
    ------
    GeometryError
        target and sensor positions coincide
    '''
    r, b, e, rr = spherical_from_cartesian(state.position, state.velocity, sensor)
    return SphericalMeasurement(float(r), float(b), float(e), float(rr), state.timestamp)


def spherical_to_cart(meas: SphericalMeasurement, sensor: SensorPose) -> np.ndarray:
    """Inverse of the position part of :func:`cart_to_spherical`."""
    return cartesian_from_spherical(meas.range, meas.bearing, meas.elevation, sensor)


def radar_measurement(state_vector, sensor: SensorPose) -> np.ndarray:
    """The measurement function h(x) on interleaved state vectors of shape ``(..., 6)``."""
    state_vector = np.asarray(state_vector, dtype=float)
    return spherical_from_cartesian(
        state_vector[..., POSITION_INDEX], state_vector[..., VELOCITY_INDEX], sensor
    )


def measurement_jacobian(state_mean, sensor: SensorPose) -> np.ndarray:
    '''
    Analytic Jacobian of :func:`radar_measurement`, shape ``(4, 6)``.

    Rows are ``(range, bearing, elevation, range_rate)``, columns the
    interleaved state ``(x, vx, y, vy, z, vz)``. At the zenith
    (zero horizontal distance) the bearing and elevation rows are zero.

    Raises
    ------
    GeometryError
        target and sensor positions coincide
    '''
    x = np.asarray(state_mean, dtype=float)
    p = x[POSITION_INDEX]
    v = x[VELOCITY_INDEX]
    d = p - sensor.position
    rho2 = float(d @ d)
    if rho2 == 0.0:
        raise GeometryError(p, sensor.position)
    rho = np.sqrt(rho2)
    r_xy2 = d[0] ** 2 + d[1] ** 2
    r_xy = np.sqrt(r_xy2)
    radial_speed = float(d @ v) / rho

    H = np.zeros((4, 6))
    H[0, POSITION_INDEX] = d / rho
    if r_xy > 0.0:
        H[1, POSITION_INDEX] = [-d[1] / r_xy2, d[0] / r_xy2, 0.0]
        H[2, POSITION_INDEX] = [
            -d[0] * d[2] / (rho2 * r_xy),
            -d[1] * d[2] / (rho2 * r_xy),
            r_xy / rho2,
        ]
    H[3, POSITION_INDEX] = v / rho - radial_speed * d / rho2
    H[3, VELOCITY_INDEX] = d / rho
    return H
