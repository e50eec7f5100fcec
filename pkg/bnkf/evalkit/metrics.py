import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import chi2

from ..errors import CovarianceError, SingularMatrixError
from ..geom import GaussianEstimate, condition_number


__all__ = (
    "euclidean_error",
    "cov_volume",
    "mahalanobis_sq",
    "mahalanobis_sq_batch",
    "nees",
    "consistency_bounds",
)


def euclidean_error(estimate, truth):
    """``||estimate - truth||`` over the last axis, meters."""
    err = np.linalg.norm(np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float), axis=-1)
    return float(err) if np.ndim(err) == 0 else err


def cov_volume(P):
    '''
    Determinant of a covariance (or a stack of them), m^6 for a 3 x 3
    position covariance.

    Raises
    ------
    CovarianceError
        a matrix is not PSD up to jitter
    '''
    P = np.asarray(P, dtype=float)
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    trace = np.trace(P, axis1=-2, axis2=-1)
    eps = 1e-9 * np.where(trace > 0, trace, 1.0)
    lowest = np.min(np.linalg.eigvalsh(P), axis=-1)
    if np.any(lowest < -eps):
        raise CovarianceError("volume input", float(np.min(lowest)))
    det = np.linalg.det(P)
    return float(det) if np.ndim(det) == 0 else det


def mahalanobis_sq(truth, estimate: GaussianEstimate) -> float:
    '''
    ``(x - m)^T P^-1 (x - m)`` through a Cholesky solve.

    Raises
    ------
    SingularMatrixError
        ``P`` is not invertible
    '''
    err = np.asarray(truth, dtype=float) - estimate.mean
    cond = condition_number(estimate.covariance)
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularMatrixError("estimate covariance", cond)
    try:
        factor = cho_factor(estimate.covariance, lower=True)
    except LinAlgError:
        raise SingularMatrixError("estimate covariance", cond) from None
    return float(err @ cho_solve(factor, err))


def mahalanobis_sq_batch(truth, means, covariances) -> np.ndarray:
    """:func:`mahalanobis_sq` for ``N`` estimates, via stacked Cholesky factors."""
    err = np.asarray(truth, dtype=float) - np.asarray(means, dtype=float)
    covariances = np.asarray(covariances, dtype=float)
    cond = condition_number(covariances)
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularMatrixError("estimate covariance", cond)
    try:
        L = np.linalg.cholesky(covariances)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("estimate covariance", cond) from None
    whitened = np.linalg.solve(L, err[..., None])[..., 0]
    return np.sum(whitened ** 2, axis=-1)


def nees(truth_state, estimate: GaussianEstimate) -> float:
    """Normalized estimation error squared of a full state estimate."""
    return mahalanobis_sq(truth_state, estimate)


def consistency_bounds(dim: int, n: int, confidence: float = 0.95):
    '''
    Two-sided acceptance interval for the mean of ``n`` independent NEES
    values of a consistent ``dim``-dimensional estimator.

    ``n * mean`` is chi-square with ``n * dim`` degrees of freedom.

    Returns
    -------
    (low, high) : tuple of float
    '''
    alpha = 1.0 - confidence
    dof = dim * n
    return (float(chi2.ppf(alpha / 2.0, dof) / n), float(chi2.ppf(1.0 - alpha / 2.0, dof) / n))
