import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..bnn import FeatureVector, BnnModel, mc_predict_batch
from ..filters import position_correct_batch
from ..geom import GaussianEstimate, NoiseSigmas, SensorPose, converted_position_measurement_batch
from .ensemble import EnsembleModel


__all__ = (
    "BNN",
    "BNKF",
    "BNKFE",
    "EstimatorOutput",
    "BatchEstimate",
    "bnn_estimate",
    "bnkf_estimate",
    "bnkfe_estimate",
    "bnn_estimate_batch",
    "bnkf_estimate_batch",
    "bnkfe_estimate_batch",
)


BNN = "bnn"
BNKF = "bnkf"
BNKFE = "bnkfe"


@dataclass
class EstimatorOutput:
    """
    A 3-D position estimate produced by one of the learned estimators.

    Attributes
    ----------
    estimate : GaussianEstimate
        position mean (m) and covariance (m^2)
    method : str
    wall_time : float
        seconds spent producing the estimate
    prior : GaussianEstimate, optional
        the network's moments before the position correction
    """
    estimate: GaussianEstimate
    method: str
    wall_time: float
    prior: Optional[GaussianEstimate] = None


@dataclass
class BatchEstimate:
    """Stacked estimator outputs for ``N`` feature rows."""
    means: np.ndarray
    covariances: np.ndarray
    method: str
    wall_time: float
    prior_means: Optional[np.ndarray] = None
    prior_covariances: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.means)

    def __getitem__(self, i) -> EstimatorOutput:
        prior = None
        if self.prior_means is not None:
            prior = GaussianEstimate(self.prior_means[i], self.prior_covariances[i])
        return EstimatorOutput(
            GaussianEstimate(self.means[i], self.covariances[i]),
            self.method,
            self.wall_time / len(self),
            prior,
        )


def _features(X):
    if isinstance(X, FeatureVector):
        X = X.as_array()
    return np.atleast_2d(np.asarray(X, dtype=float))


def _converted(X, sensor, sigmas):
    # the t+1 measurement sits in columns 4..7, its sigmas in 8..11
    if sigmas is None:
        sig = X[:, 8:12]
    elif isinstance(sigmas, NoiseSigmas):
        sig = sigmas.as_vector()
    else:
        sig = np.asarray(sigmas, dtype=float)
    return converted_position_measurement_batch(X[:, 4:8], sig, sensor)


def bnn_estimate_batch(model: BnnModel, X, seed=0, n: int = 100) -> BatchEstimate:
    """Standalone network: Monte-Carlo moments, no correction."""
    X = _features(X)
    start = time.perf_counter()
    means, covs = mc_predict_batch(model, X, n, seed)
    return BatchEstimate(means, covs, BNN, time.perf_counter() - start, means, covs)


def bnkf_estimate_batch(model: BnnModel, X, sensor: SensorPose, seed=0, n: int = 100,
                        sigmas=None) -> BatchEstimate:
    '''
    Network moments corrected with the converted ``t+1`` measurement.

    Parameters
    ----------
    model : BnnModel
        a 3-output position network
    X : array-like
        feature rows ``(N, 12)``
    sensor : SensorPose
    seed : int
    n : int
        Monte-Carlo passes
    sigmas : NoiseSigmas | array-like, optional
        overrides the sigma columns of ``X`` for the correction only
    '''
    X = _features(X)
    start = time.perf_counter()
    prior_means, prior_covs = mc_predict_batch(model, X, n, seed)
    z_means, z_covs = _converted(X, sensor, sigmas)
    means, covs = position_correct_batch(prior_means, prior_covs, z_means, z_covs)
    return BatchEstimate(means, covs, BNKF, time.perf_counter() - start, prior_means, prior_covs)


def bnkfe_estimate_batch(ensemble: EnsembleModel, X, sensor: SensorPose, seed=0, n: int = 100,
                         sigmas=None) -> BatchEstimate:
    """:func:`bnkf_estimate_batch` with the per-axis ensemble's diagonal prior."""
    X = _features(X)
    start = time.perf_counter()
    prior_means, prior_covs = ensemble.predict_batch(X, n, seed)
    z_means, z_covs = _converted(X, sensor, sigmas)
    means, covs = position_correct_batch(prior_means, prior_covs, z_means, z_covs)
    return BatchEstimate(means, covs, BNKFE, time.perf_counter() - start, prior_means, prior_covs)


def bnn_estimate(model: BnnModel, z, seed=0, n: int = 100) -> EstimatorOutput:
    return bnn_estimate_batch(model, z, seed, n)[0]


def bnkf_estimate(model: BnnModel, z, sigmas: NoiseSigmas, sensor: SensorPose, seed=0,
                  n: int = 100) -> EstimatorOutput:
    '''
    Bayesian neural Kalman filter estimate for one feature vector.

    ``(f_mu, f_Sigma)`` from :func:`~bnkf.bnn.mc_predict` is the prior,
    the ``t+1`` measurement converted with ``sigmas`` is the observation,
    fused by :func:`~bnkf.filters.position_correct`.
    '''
    return bnkf_estimate_batch(model, z, sensor, seed, n, sigmas)[0]


def bnkfe_estimate(ensemble: EnsembleModel, z, sigmas: NoiseSigmas, sensor: SensorPose, seed=0,
                   n: int = 100) -> EstimatorOutput:
    return bnkfe_estimate_batch(ensemble, z, sensor, seed, n, sigmas)[0]
