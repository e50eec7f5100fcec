from dataclasses import dataclass

import numpy as np
from scipy.special import expit


__all__ = (
    "ACTIVATIONS",
    "softplus",
    "BayesLinearLayer",
)


def softplus(rho):
    """``log(1 + exp(rho))`` without overflow."""
    return np.logaddexp(0.0, rho)


def _silu(a):
    return a * expit(a)


def _silu_grad(a):
    s = expit(a)
    return s * (1.0 + a * (1.0 - s))


# name -> (function, derivative)
ACTIVATIONS = {
    "silu": (_silu, _silu_grad),
    "identity": (lambda a: a, lambda a: np.ones_like(a)),
}


def _gauss_kl(mu, sigma, prior_sigma):
    return np.sum(np.log(prior_sigma / sigma) + (sigma ** 2 + mu ** 2) / (2.0 * prior_sigma ** 2) - 0.5)


@dataclass
class BayesLinearLayer:
    """
    Affine layer with a factorized Gaussian posterior over its weights and
    biases. Spreads are stored as ``rho`` with ``sigma = softplus(rho)``.

    Attributes
    ----------
    weight_mu : np.ndarray
        shape ``(out, in)``
    weight_rho : np.ndarray
        shape ``(out, in)``
    bias_mu : np.ndarray
        shape ``(out,)``
    bias_rho : np.ndarray
        shape ``(out,)``
    """
    weight_mu: np.ndarray
    weight_rho: np.ndarray
    bias_mu: np.ndarray
    bias_rho: np.ndarray

    PARAMETERS = ("weight_mu", "weight_rho", "bias_mu", "bias_rho")

    @classmethod
    def initialize(cls, n_in: int, n_out: int, rng: np.random.Generator, rho_init: float = -3.0):
        """Fan-in scaled uniform means, constant ``rho``."""
        bound = 1.0 / np.sqrt(n_in)
        return cls(
            weight_mu=rng.uniform(-bound, bound, size=(n_out, n_in)),
            weight_rho=np.full((n_out, n_in), float(rho_init)),
            bias_mu=rng.uniform(-bound, bound, size=n_out),
            bias_rho=np.full(n_out, float(rho_init)),
        )

    @property
    def n_in(self) -> int:
        return self.weight_mu.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight_mu.shape[0]

    @property
    def weight_sigma(self) -> np.ndarray:
        return softplus(self.weight_rho)

    @property
    def bias_sigma(self) -> np.ndarray:
        return softplus(self.bias_rho)

    def parameters(self):
        return [getattr(self, name) for name in self.PARAMETERS]

    def sample(self, rng: np.random.Generator):
        """One draw ``(W, b)`` from the posterior, ``W = mu + sigma * eps``."""
        W = self.weight_mu + self.weight_sigma * rng.standard_normal(self.weight_mu.shape)
        b = self.bias_mu + self.bias_sigma * rng.standard_normal(self.bias_mu.shape)
        return W, b

    def kl(self, prior_sigma: float) -> float:
        '''
        Closed-form ``KL(q || p)`` summed over every weight and bias entry,
        against a zero-mean prior with standard deviation ``prior_sigma``.
        '''
        return float(
            _gauss_kl(self.weight_mu, self.weight_sigma, prior_sigma)
            + _gauss_kl(self.bias_mu, self.bias_sigma, prior_sigma)
        )

    def kl_gradients(self, prior_sigma: float):
        """Gradients of :meth:`kl` in :attr:`PARAMETERS` order."""
        var_p = prior_sigma ** 2
        grads = []
        for mu, rho in ((self.weight_mu, self.weight_rho), (self.bias_mu, self.bias_rho)):
            sigma = softplus(rho)
            d_sigma = -1.0 / sigma + sigma / var_p
            grads.extend([mu / var_p, d_sigma * expit(rho)])
        return grads

    def forward_local(self, h: np.ndarray, noise: np.ndarray):
        '''
        Locally reparameterized forward pass.

        Each row of ``h`` sees an independent weight draw: the pre-activation
        is sampled directly from its Gaussian,
        ``a = h mu^T + b_mu + sqrt(h^2 sigma^2T + sigma_b^2) * noise``.

        Returns
        -------
        a : np.ndarray
            shape ``(B, out)``
        cache : tuple
            input for :meth:`backward_local`
        '''
        w_var = self.weight_sigma ** 2
        b_var = self.bias_sigma ** 2
        mean = h @ self.weight_mu.T + self.bias_mu
        std = np.sqrt((h * h) @ w_var.T + b_var)
        return mean + std * noise, (h, std, noise, w_var)

    def backward_local(self, d_a: np.ndarray, cache):
        '''
        Reverse pass of :meth:`forward_local`.

        Returns
        -------
        d_h : np.ndarray
            gradient with respect to the layer input
        grads : list
            gradients in :attr:`PARAMETERS` order
        '''
        h, std, noise, w_var = cache
        d_var = d_a * noise / (2.0 * std)
        d_weight_mu = d_a.T @ h
        d_bias_mu = d_a.sum(axis=0)
        d_weight_sigma = 2.0 * self.weight_sigma * (d_var.T @ (h * h))
        d_bias_sigma = 2.0 * self.bias_sigma * d_var.sum(axis=0)
        d_h = d_a @ self.weight_mu + 2.0 * h * (d_var @ w_var)
        return d_h, [
            d_weight_mu,
            d_weight_sigma * expit(self.weight_rho),
            d_bias_mu,
            d_bias_sigma * expit(self.bias_rho),
        ]

    def to_dict(self):
        return {name: getattr(self, name).tolist() for name in self.PARAMETERS}

    @classmethod
    def from_dict(cls, data: dict):
        return cls(**{name: np.asarray(data[name], dtype=float) for name in cls.PARAMETERS})
