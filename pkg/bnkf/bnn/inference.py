from dataclasses import dataclass

import numpy as np

from ..errors import ModelError
from ..geom import GaussianEstimate
from ..seeding import make_rng
from .model import BnnModel


__all__ = (
    "COVARIANCE_FLOOR",
    "PredictiveMoments",
    "sample_outputs",
    "mc_predict",
    "mc_predict_batch",
)


# m^2
COVARIANCE_FLOOR = 1e-6


@dataclass
class PredictiveMoments:
    """
    Sample moments of ``n_samples`` stochastic forward passes.

    Attributes
    ----------
    mean : np.ndarray
        shape ``(out,)``
    covariance : np.ndarray
        shape ``(out, out)``; ``(1, 1)`` for a single-output model
    n_samples : int
    """
    mean: np.ndarray
    covariance: np.ndarray
    n_samples: int

    def as_estimate(self) -> GaussianEstimate:
        return GaussianEstimate(self.mean, self.covariance)


def sample_outputs(model: BnnModel, X, n: int, seed) -> np.ndarray:
    '''
    ``n`` forward samples for every row of ``X``.

    Sample ``k`` draws one set of weights from the stream seeded by
    ``seed`` and applies it to all rows, so the samples of a row do not
    depend on which other rows share the batch.

    Returns
    -------
    samples : np.ndarray
        shape ``(n, N, out)``
    '''
    rng = make_rng(seed)
    x_std = model.input_scaler.transform(np.atleast_2d(X))
    out = np.empty((n, len(x_std), model.output_dim))
    for k in range(n):
        weights = [layer.sample(rng) for layer in model.layers]
        out[k] = model.propagate(x_std, weights)
    return model.target_scaler.inverse_transform(out)


def _floor(covs, floor):
    eigvals, eigvecs = np.linalg.eigh(covs)
    low = np.any(eigvals < floor, axis=-1)
    if not np.any(low):
        return covs
    covs = covs.copy()
    clipped = np.maximum(eigvals[low], floor)
    repaired = np.einsum("nij,nj,nkj->nik", eigvecs[low], clipped, eigvecs[low])
    covs[low] = 0.5 * (repaired + np.swapaxes(repaired, -1, -2))
    return covs


def mc_predict_batch(model: BnnModel, X, n: int = 100, seed=0, floor: float = COVARIANCE_FLOOR):
    '''
    Monte-Carlo predictive moments for a stack of feature vectors.

    The covariance is the unbiased sample covariance; eigenvalues below
    ``floor`` are raised to it, matrices already above the floor are left
    untouched.

    Returns
    -------
    means : np.ndarray
        shape ``(N, out)``
    covariances : np.ndarray
        shape ``(N, out, out)``

    Raises
    ------
    ModelError
        ``n < 2``
    '''
    if n < 2:
        raise ModelError('Monte-Carlo prediction needs n >= 2 samples, got {}'.format(n))
    samples = sample_outputs(model, X, n, seed)
    means = samples.mean(axis=0)
    resid = samples - means
    covs = np.einsum("kni,knj->nij", resid, resid) / (n - 1)
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    if floor > 0:
        covs = _floor(covs, floor)
    return means, covs


def mc_predict(model: BnnModel, x, n: int = 100, seed=0, floor: float = COVARIANCE_FLOOR) -> PredictiveMoments:
    """Single-vector :func:`mc_predict_batch`."""
    means, covs = mc_predict_batch(model, np.asarray(x, dtype=float).reshape(1, -1), n, seed, floor)
    return PredictiveMoments(means[0], covs[0], n)
