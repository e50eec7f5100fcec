import hashlib

import numpy as np


__all__ = (
    "derive_seed",
    "make_rng",
)


def derive_seed(master: int, *labels) -> int:
    '''
    Derives a stable sub-seed from a master seed and role labels.

    The sub-seed depends only on the master seed and the labels, never on
    the order in which other sub-seeds were requested.

    Parameters
    ----------
    master : int
        the run's master seed
    labels : str | int | float
        role labels, e.g. ``("trajectory", 12)``

    Returns
    -------
    seed : int
        a non-negative 63-bit integer
    '''
    key = ":".join([str(int(master))] + [str(label) for label in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
