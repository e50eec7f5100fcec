from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..errors import ModelError
from ..seeding import make_rng
from .features import FEATURE_DIM
from .layers import ACTIVATIONS, BayesLinearLayer


__all__ = (
    "HIDDEN_LAYERS",
    "Standardizer",
    "BnnModel",
    "forward_sample",
    "kl_divergence",
    "loss",
    "loss_and_gradients",
)


HIDDEN_LAYERS = (64, 64, 64, 64, 64)


@dataclass
class Standardizer:
    """
    Per-column affine scaler ``(x - mean) / std``.

    Zero-variance columns keep ``std = 1``.
    """
    mean: Optional[np.ndarray] = None
    std: Optional[np.ndarray] = None

    @classmethod
    def fit(cls, data) -> "Standardizer":
        data = np.asarray(data, dtype=float)
        std = data.std(axis=0)
        return cls(data.mean(axis=0), np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def fitted(self) -> bool:
        return self.mean is not None and self.std is not None

    def _check(self):
        if not self.fitted:
            raise ModelError('Standardizer has not been fitted')

    def transform(self, data) -> np.ndarray:
        self._check()
        return (np.asarray(data, dtype=float) - self.mean) / self.std

    def inverse_transform(self, data) -> np.ndarray:
        self._check()
        return np.asarray(data, dtype=float) * self.std + self.mean

    def to_dict(self):
        self._check()
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict):
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["std"], dtype=float))


@dataclass
class BnnModel:
    """
    Variational Bayesian multilayer perceptron.

    Hidden layers apply :attr:`activation`; the output layer is affine.
    Inputs and targets pass through their standardizers, so every parameter
    lives in standardized space.

    Attributes
    ----------
    layers : List[BayesLinearLayer]
    activation : str
        a key of :data:`~bnkf.bnn.layers.ACTIVATIONS`
    input_scaler : Standardizer
    target_scaler : Standardizer
    prior_sigma : float
        std of the zero-mean Gaussian weight prior
    kl_weight : float
        ``beta`` in the training objective
    fingerprint : dict
        seed, hyperparameters and tags of the training run
    trace : list
        per-epoch training loss records
    """
    layers: List[BayesLinearLayer]
    activation: str = "silu"
    input_scaler: Standardizer = field(default_factory=Standardizer)
    target_scaler: Standardizer = field(default_factory=Standardizer)
    prior_sigma: float = 0.1
    kl_weight: float = 1.0
    fingerprint: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ModelError('Unknown activation <{}>'.format(self.activation))
        for prev, layer in zip(self.layers, self.layers[1:]):
            if prev.n_out != layer.n_in:
                raise ModelError('Layer widths do not chain: {} -> {}'.format(prev.n_out, layer.n_in))

    def __repr__(self):
        return '<BnnModel {} activation={}>'.format(
            "->".join(str(n) for n in self.architecture), self.activation)

    @classmethod
    def initialize(cls, output_dim: int, rng=None, input_dim: int = FEATURE_DIM,
                   hidden=HIDDEN_LAYERS, activation: str = "silu", prior_sigma: float = 0.1,
                   kl_weight: float = 1.0, rho_init: float = -3.0) -> "BnnModel":
        rng = make_rng(rng)
        widths = [input_dim] + list(hidden) + [output_dim]
        layers = [
            BayesLinearLayer.initialize(n_in, n_out, rng, rho_init)
            for n_in, n_out in zip(widths, widths[1:])
        ]
        return cls(layers, activation=activation, prior_sigma=prior_sigma, kl_weight=kl_weight)

    @property
    def architecture(self):
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def _act(self):
        return ACTIVATIONS[self.activation]

    def propagate(self, x_std: np.ndarray, weights) -> np.ndarray:
        '''
        Standardized-space forward pass with explicit ``(W, b)`` per layer.
        '''
        act, _ = self._act()
        h = x_std
        last = len(weights) - 1
        for i, (W, b) in enumerate(weights):
            h = h @ W.T + b
            if i != last:
                h = act(h)
        return h

    def mean_forward(self, x) -> np.ndarray:
        """The deterministic network built from the posterior means."""
        x_std = self.input_scaler.transform(x)
        out = self.propagate(x_std, [(layer.weight_mu, layer.bias_mu) for layer in self.layers])
        return self.target_scaler.inverse_transform(out)

    def to_dict(self):
        return {
            "architecture": self.architecture,
            "activation": self.activation,
            "prior_sigma": self.prior_sigma,
            "kl_weight": self.kl_weight,
            "input_scaler": self.input_scaler.to_dict(),
            "target_scaler": self.target_scaler.to_dict(),
            "layers": [layer.to_dict() for layer in self.layers],
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, data: dict):
        try:
            model = cls(
                layers=[BayesLinearLayer.from_dict(layer) for layer in data["layers"]],
                activation=data["activation"],
                input_scaler=Standardizer.from_dict(data["input_scaler"]),
                target_scaler=Standardizer.from_dict(data["target_scaler"]),
                prior_sigma=float(data["prior_sigma"]),
                kl_weight=float(data["kl_weight"]),
                fingerprint=dict(data.get("fingerprint", {})),
            )
        except KeyError as e:
            raise ModelError('Model document is missing field {}'.format(e)) from None
        if model.architecture != list(data["architecture"]):
            raise ModelError('Stored architecture {} does not match layer shapes {}'.format(
                data["architecture"], model.architecture))
        return model


def forward_sample(model: BnnModel, x, noise_seed) -> np.ndarray:
    '''
    One stochastic forward pass.

    Every layer draws ``W = mu + sigma * eps`` from the stream seeded by
    ``noise_seed``; the draw is shared by all rows of ``x``.

    Parameters
    ----------
    model : BnnModel
    x : array-like
        a feature vector ``(d,)`` or a stack ``(N, d)``
    noise_seed : int | np.random.Generator

    Returns
    -------
    output : np.ndarray
        de-standardized, shape ``(out,)`` or ``(N, out)``

    Raises
    ------
    ModelError
        the model's scalers were never fitted
    '''
    rng = make_rng(noise_seed)
    x_std = model.input_scaler.transform(x)
    weights = [layer.sample(rng) for layer in model.layers]
    return model.target_scaler.inverse_transform(model.propagate(x_std, weights))


def kl_divergence(model: BnnModel) -> float:
    """Closed-form KL between the weight posterior and the prior, summed over all entries."""
    return sum(layer.kl(model.prior_sigma) for layer in model.layers)


def _noise_for(model, batch_size, rng):
    return [rng.standard_normal((batch_size, layer.n_out)) for layer in model.layers]


def _objective(model, x_std, y_std, beta, n_train, noise, with_gradients):
    act, act_grad = model._act()
    caches, pre = [], []
    h = x_std
    last = len(model.layers) - 1
    for i, (layer, eps) in enumerate(zip(model.layers, noise)):
        a, cache = layer.forward_local(h, eps)
        caches.append(cache)
        pre.append(a)
        h = act(a) if i != last else a

    resid = h - y_std
    mse = float(np.mean(resid ** 2))
    kl = kl_divergence(model)
    kl_term = beta * kl / n_train
    breakdown = {"mse": mse, "kl": kl, "kl_term": kl_term}
    total = mse + kl_term
    if not with_gradients:
        return total, breakdown, None

    d_h = 2.0 * resid / resid.size
    grads = [None] * len(model.layers)
    for i in range(last, -1, -1):
        d_a = d_h if i == last else d_h * act_grad(pre[i])
        d_h, layer_grads = model.layers[i].backward_local(d_a, caches[i])
        kl_grads = model.layers[i].kl_gradients(model.prior_sigma)
        grads[i] = [g + (beta / n_train) * k for g, k in zip(layer_grads, kl_grads)]
    return total, breakdown, [g for layer_grads in grads for g in layer_grads]


def _prepare(model, batch_x, batch_y):
    batch_x = np.atleast_2d(np.asarray(batch_x, dtype=float))
    if batch_x.shape[0] == 0 or batch_x.size == 0:
        raise ModelError('loss needs a nonempty batch')
    batch_y = np.asarray(batch_y, dtype=float).reshape(len(batch_x), -1)
    return model.input_scaler.transform(batch_x), model.target_scaler.transform(batch_y)


def loss(model: BnnModel, batch_x, batch_y, beta: float = None, n_train: int = None,
         noise=None, rng=None):
    '''
    Training objective: mean squared error of one weight sample per example
    in standardized target space plus ``beta * KL / n_train``.

    Parameters
    ----------
    model : BnnModel
    batch_x, batch_y : array-like
        raw (unstandardized) features and targets
    beta : float
        defaults to ``model.kl_weight``
    n_train : int
        size of the training set; defaults to the batch size
    noise : list, optional
        fixed standard-normal draws, one ``(B, out)`` array per layer
    rng : int | np.random.Generator, optional
        stream for the draws when ``noise`` is not given

    Returns
    -------
    total : float
    breakdown : dict
        ``mse``, ``kl`` and the scaled ``kl_term``

    Raises
    ------
    ModelError
        empty batch or unfitted scalers
    '''
    x_std, y_std = _prepare(model, batch_x, batch_y)
    beta = model.kl_weight if beta is None else beta
    n_train = len(x_std) if n_train is None else n_train
    if noise is None:
        noise = _noise_for(model, len(x_std), make_rng(rng))
    total, breakdown, _ = _objective(model, x_std, y_std, beta, n_train, noise, False)
    return total, breakdown


def loss_and_gradients(model: BnnModel, batch_x, batch_y, beta: float = None, n_train: int = None,
                       noise=None, rng=None):
    """:func:`loss` plus reverse-mode gradients aligned with :meth:`BnnModel.parameters`."""
    x_std, y_std = _prepare(model, batch_x, batch_y)
    beta = model.kl_weight if beta is None else beta
    n_train = len(x_std) if n_train is None else n_train
    if noise is None:
        noise = _noise_for(model, len(x_std), make_rng(rng))
    return _objective(model, x_std, y_std, beta, n_train, noise, True)
