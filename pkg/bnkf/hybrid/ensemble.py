import logging
from dataclasses import dataclass, replace
from typing import List

import numpy as np

from ..bnn import BnnModel, TrainConfig, mc_predict_batch, train
from ..errors import ModelError
from ..seeding import derive_seed


__all__ = (
    "AXES",
    "EnsembleModel",
    "train_ensemble",
)


LOGGER = logging.getLogger(__name__)

AXES = ("x", "y", "z")


@dataclass
class EnsembleModel:
    """
    Three independent single-output networks, one per Cartesian axis.

    Attributes
    ----------
    models : List[BnnModel]
        ordered ``x, y, z``
    """
    models: List[BnnModel]

    def __post_init__(self):
        if len(self.models) != len(AXES):
            raise ModelError('An ensemble holds exactly {} axis models, got {}'.format(len(AXES), len(self.models)))
        for axis, model in zip(AXES, self.models):
            if model.output_dim != 1:
                raise ModelError('Axis model <{}> must have one output, has {}'.format(axis, model.output_dim))
        if len({model.input_dim for model in self.models}) != 1:
            raise ModelError('Axis models disagree on the input dimension')

    def __iter__(self):
        return iter(self.models)

    @property
    def input_dim(self) -> int:
        return self.models[0].input_dim

    def predict_batch(self, X, n: int = 100, seed=0):
        '''
        Per-axis Monte-Carlo moments assembled into a diagonal covariance.

        Returns
        -------
        means : np.ndarray
            shape ``(N, 3)``
        covariances : np.ndarray
            shape ``(N, 3, 3)``, off-diagonal entries exactly zero
        '''
        X = np.atleast_2d(np.asarray(X, dtype=float))
        means = np.empty((len(X), len(AXES)))
        variances = np.empty((len(X), len(AXES)))
        for k, (axis, model) in enumerate(zip(AXES, self.models)):
            m, c = mc_predict_batch(model, X, n, derive_seed(seed, "axis", axis))
            means[:, k] = m[:, 0]
            variances[:, k] = c[:, 0, 0]
        covs = np.zeros((len(X), len(AXES), len(AXES)))
        idx = np.arange(len(AXES))
        covs[:, idx, idx] = variances
        return means, covs


def train_ensemble(features, targets, config: TrainConfig = None, tags: dict = None) -> EnsembleModel:
    '''
    Trains one single-output network per axis on the coordinate projections
    of ``targets``.

    Each axis gets its own seed, derived from ``config.seed`` and the axis
    name.

    Parameters
    ----------
    features : array-like
        shape ``(N, d)``
    targets : array-like
        shape ``(N, 3)``
    config : TrainConfig
    tags : dict
        extra fingerprint entries
    '''
    config = config or TrainConfig()
    targets = np.asarray(targets, dtype=float)
    if targets.ndim != 2 or targets.shape[1] != len(AXES):
        raise ModelError('ensemble targets must have shape (N, 3), got {}'.format(targets.shape))
    models = []
    for k, axis in enumerate(AXES):
        axis_config = replace(config, seed=derive_seed(config.seed, "axis", axis))
        LOGGER.info("Training axis model <%s> (seed %d)", axis, axis_config.seed)
        axis_tags = dict(tags or {}, axis=axis)
        models.append(train(features, targets[:, k], axis_config, axis_tags))
    return EnsembleModel(models)
