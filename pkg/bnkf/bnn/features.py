from dataclasses import dataclass

import numpy as np

from ..geom import NoiseSigmas, SphericalMeasurement, wrap_angle


__all__ = (
    "FEATURE_NAMES",
    "FEATURE_DIM",
    "FeatureVector",
    "feature_matrix",
)


FEATURE_NAMES = (
    "range_t", "bearing_t", "elevation_t", "range_rate_t",
    "range_t1", "bearing_t1", "elevation_t1", "range_rate_t1",
    "sigma_range", "sigma_bearing", "sigma_elevation", "sigma_range_rate",
)
FEATURE_DIM = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    """
    The network input built from two consecutive measurements and the noise
    sigmas of the tier that produced them.

    Entries are ordered as :data:`FEATURE_NAMES`; angles in radians.
    """
    current: SphericalMeasurement
    next: SphericalMeasurement
    sigmas: NoiseSigmas

    def as_array(self) -> np.ndarray:
        return feature_matrix(self.current.as_vector(), self.next.as_vector(), self.sigmas.as_vector())[0]

    @classmethod
    def from_array(cls, values, t0: float = 0.0, t1: float = 0.0):
        values = np.asarray(values, dtype=float)
        return cls(
            SphericalMeasurement.from_vector(values[0:4], t0),
            SphericalMeasurement.from_vector(values[4:8], t1),
            NoiseSigmas.from_vector(values[8:12]),
        )


def feature_matrix(z_current, z_next, sigmas) -> np.ndarray:
    '''
    Stacks measurement pairs into an ``(N, 12)`` feature matrix.

    Parameters
    ----------
    z_current, z_next : array-like
        shape ``(N, 4)`` (or ``(4,)``) in measurement order
    sigmas : array-like
        shape ``(N, 4)`` or ``(4,)``, same order
    '''
    z_current = np.atleast_2d(np.asarray(z_current, dtype=float))
    z_next = np.atleast_2d(np.asarray(z_next, dtype=float))
    sig = np.broadcast_to(np.asarray(sigmas, dtype=float), z_next.shape)
    features = np.concatenate([z_current, z_next, sig], axis=1)
    for col in (1, 2, 5, 6):
        features[:, col] = wrap_angle(features[:, col])
    return features
