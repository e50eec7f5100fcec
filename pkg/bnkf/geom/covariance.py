import logging

import numpy as np

from ..errors import CovarianceError, SingularMatrixError


__all__ = (
    "JITTER_SCALE",
    "symmetrize",
    "ensure_psd",
    "ensure_psd_batch",
    "safe_cholesky",
    "condition_number",
    "checked_solve",
)


LOGGER = logging.getLogger(__name__)

JITTER_SCALE = 1e-9


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def _jitter(P):
    trace = float(np.trace(P))
    return JITTER_SCALE * trace if trace > 0 else JITTER_SCALE


def ensure_psd(P: np.ndarray, name: str = "covariance") -> np.ndarray:
    '''
    Symmetrizes ``P`` and verifies it is PSD up to jitter.

    Eigenvalues down to ``-1e-9 * trace`` are accepted. Anything more
    negative gets one repair ``P + eps*I`` with ``eps = 1e-9 * trace``;
    if that is still not PSD a :exc:`CovarianceError` is raised.
    '''
    P = symmetrize(np.asarray(P, dtype=float))
    eps = _jitter(P)
    lowest = float(np.min(np.linalg.eigvalsh(P)))
    if lowest >= -eps:
        return P
    LOGGER.debug("Jitter repair on <%s>: smallest eigenvalue %.3e", name, lowest)
    repaired = P + eps * np.eye(P.shape[0])
    lowest = float(np.min(np.linalg.eigvalsh(repaired)))
    if lowest < -eps:
        raise CovarianceError(name, lowest)
    return repaired


def ensure_psd_batch(P: np.ndarray, name: str = "covariance") -> np.ndarray:
    """:func:`ensure_psd` over a stack of matrices of shape ``(N, n, n)``."""
    P = symmetrize(np.asarray(P, dtype=float))
    n = P.shape[-1]
    trace = np.trace(P, axis1=-2, axis2=-1)
    eps = np.where(trace > 0, JITTER_SCALE * trace, JITTER_SCALE)
    lowest = np.min(np.linalg.eigvalsh(P), axis=-1)
    bad = lowest < -eps
    if not np.any(bad):
        return P
    LOGGER.debug("Jitter repair on %d matrices of <%s>", int(np.sum(bad)), name)
    P = P.copy()
    P[bad] += eps[bad, None, None] * np.eye(n)
    lowest = np.min(np.linalg.eigvalsh(P[bad]), axis=-1)
    if np.any(lowest < -eps[bad]):
        raise CovarianceError(name, float(np.min(lowest)))
    return P


def safe_cholesky(P: np.ndarray, name: str = "covariance") -> np.ndarray:
    '''
    Lower-triangular factor of a PSD matrix.

    An all-zero matrix factors to zero. Otherwise one jitter repair is
    attempted before giving up with :exc:`CovarianceError`.
    '''
    P = symmetrize(np.asarray(P, dtype=float))
    if not np.any(P):
        return np.zeros_like(P)
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        pass
    LOGGER.debug("Cholesky failed on <%s>; retrying with jitter", name)
    try:
        return np.linalg.cholesky(P + _jitter(P) * np.eye(P.shape[0]))
    except np.linalg.LinAlgError:
        raise CovarianceError(name, float(np.min(np.linalg.eigvalsh(P)))) from None


def condition_number(M: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(M)
    return float(np.max(cond))


def checked_solve(A: np.ndarray, B: np.ndarray, name: str) -> np.ndarray:
    """Solves ``A X = B`` for symmetric ``A``; singular ``A`` raises :exc:`SingularMatrixError`."""
    cond = condition_number(A)
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularMatrixError(name, cond)
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(name, cond) from None
