import numpy as np

from ..errors import SingularMatrixError
from ..geom import GaussianEstimate, checked_solve, condition_number, ensure_psd, ensure_psd_batch


__all__ = (
    "position_correct",
    "position_correct_batch",
)


def position_correct(prior: GaussianEstimate, z_star: GaussianEstimate) -> GaussianEstimate:
    '''
    Linear Kalman correction of a position prior with a position
    pseudo-measurement, observation matrix ``H = I``.

    ``K = P (P + R)^-1``, ``x = m + K (z - m)``, ``P' = (I - K) P``.

    Parameters
    ----------
    prior : GaussianEstimate
        3-D position prior ``(f_mu, f_Sigma)``
    z_star : GaussianEstimate
        converted measurement ``(z*, R)``

    Raises
    ------
    SingularMatrixError
        ``P + R`` is numerically singular
    '''
    P = prior.covariance
    S = P + z_star.covariance
    K = checked_solve(S, P, "position innovation covariance").T
    mean = prior.mean + K @ (z_star.mean - prior.mean)
    cov = (np.eye(prior.dim) - K) @ P
    return GaussianEstimate(mean, ensure_psd(cov, "corrected position covariance"))


def position_correct_batch(prior_means, prior_covs, z_means, z_covs):
    '''
    :func:`position_correct` over stacks of ``N`` priors and measurements.

    Returns
    -------
    means : np.ndarray
        shape ``(N, 3)``
    covariances : np.ndarray
        shape ``(N, 3, 3)``
    '''
    prior_means = np.asarray(prior_means, dtype=float)
    prior_covs = np.asarray(prior_covs, dtype=float)
    S = prior_covs + np.asarray(z_covs, dtype=float)
    cond = condition_number(S)
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularMatrixError("position innovation covariance", cond)
    # S and P are symmetric, so K^T = S^-1 P
    K = np.swapaxes(np.linalg.solve(S, prior_covs), -1, -2)
    innovation = np.asarray(z_means, dtype=float) - prior_means
    means = prior_means + np.einsum("nij,nj->ni", K, innovation)
    covs = prior_covs - K @ prior_covs
    return means, ensure_psd_batch(covs, "corrected position covariance")
