import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from ..errors import ModelError, TrainingDivergedError
from .model import HIDDEN_LAYERS, BnnModel, Standardizer, _objective
from .optim import Adam


__all__ = (
    "TrainConfig",
    "train",
)


LOGGER = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    '''
    Hyperparameters of one BNN training run.

    Attributes
    ----------
    epochs : int
    lr : float
        Adam step size
    batch_size : int
    kl_weight : float
        ``beta``; the KL term enters the loss as ``beta * KL / n_train``
    prior_sigma : float
        zero-mean Gaussian weight prior std
    seed : int
    hidden : Tuple[int, ...]
        hidden layer widths
    activation : str
    rho_init : float
        initial ``rho`` of every spread, ``sigma = softplus(rho)``
    mc_samples : int
        Monte-Carlo forward passes at inference
    '''
    epochs: int = 12
    lr: float = 1e-3
    batch_size: int = 512
    kl_weight: float = 1.0
    prior_sigma: float = 0.1
    seed: int = 0
    hidden: Tuple[int, ...] = HIDDEN_LAYERS
    activation: str = "silu"
    rho_init: float = -3.0
    mc_samples: int = 100

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)

    def to_dict(self):
        data = asdict(self)
        data["hidden"] = list(self.hidden)
        return data


def train(features, targets, config: TrainConfig = None, tags: dict = None) -> BnnModel:
    '''
    Fits a :class:`BnnModel` with Adam on the ELBO-style objective.

    Scalers are fit on the given rows only. The weight noise is redrawn
    for every example at every step from the stream seeded by
    ``config.seed``, which also drives initialization and shuffling.

    Parameters
    ----------
    features : array-like
        shape ``(N, d)``
    targets : array-like
        shape ``(N,)`` or ``(N, out)``
    config : TrainConfig
    tags : dict
        extra fingerprint entries, e.g. the fold id

    Returns
    -------
    model : BnnModel
        with :attr:`~BnnModel.fingerprint` and per-epoch :attr:`~BnnModel.trace`

    Raises
    ------
    ModelError
        fewer than two examples or non-finite targets
    TrainingDivergedError
        the loss stops being finite
    '''
    config = config or TrainConfig()
    X = np.atleast_2d(np.asarray(features, dtype=float))
    n = len(X) if X.size else 0
    if n < 2:
        raise ModelError('training needs at least 2 examples, got {}'.format(n))
    Y = np.asarray(targets, dtype=float).reshape(n, -1)
    if not np.all(np.isfinite(Y)) or not np.all(np.isfinite(X)):
        raise ModelError('training data contains non-finite values')

    rng = np.random.default_rng(config.seed)
    model = BnnModel.initialize(
        Y.shape[1], rng,
        input_dim=X.shape[1],
        hidden=config.hidden,
        activation=config.activation,
        prior_sigma=config.prior_sigma,
        kl_weight=config.kl_weight,
        rho_init=config.rho_init,
    )
    model.input_scaler = Standardizer.fit(X)
    model.target_scaler = Standardizer.fit(Y)
    x_std = model.input_scaler.transform(X)
    y_std = model.target_scaler.transform(Y)

    optimizer = Adam(model.parameters(), lr=config.lr)
    batch_size = max(1, min(config.batch_size, n))
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        sums = {"loss": 0.0, "mse": 0.0, "kl_term": 0.0}
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            noise = [rng.standard_normal((len(idx), layer.n_out)) for layer in model.layers]
            total, breakdown, grads = _objective(
                model, x_std[idx], y_std[idx], config.kl_weight, n, noise, True
            )
            step += 1
            if not np.isfinite(total):
                raise TrainingDivergedError(epoch, step, total, breakdown)
            optimizer.step(grads)
            sums["loss"] += total * len(idx)
            sums["mse"] += breakdown["mse"] * len(idx)
            sums["kl_term"] += breakdown["kl_term"] * len(idx)
        record = {"epoch": epoch}
        record.update({k: v / n for k, v in sums.items()})
        model.trace.append(record)
        LOGGER.info("Epoch %d/%d: loss=%.6g mse=%.6g kl_term=%.6g",
                    epoch, config.epochs, record["loss"], record["mse"], record["kl_term"])

    model.fingerprint = dict(config.to_dict(), n_train=n, output_dim=Y.shape[1])
    model.fingerprint.update(tags or {})
    return model
