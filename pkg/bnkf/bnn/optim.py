import numpy as np


__all__ = (
    "Adam",
)


class Adam:
    """
    Adam with bias-corrected moments, updating parameter arrays in place.

    ``lr_t = lr * sqrt(1 - beta2**t) / (1 - beta1**t)``,
    ``p -= lr_t * m / (sqrt(v) + eps)``.

    Parameters
    ----------
    parameters : list
        the arrays to optimize; they are mutated by :meth:`step`
    lr : float
    betas : tuple
    eps : float
    """
    def __init__(self, parameters, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.parameters = list(parameters)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p) for p in self.parameters]
        self._v = [np.zeros_like(p) for p in self.parameters]

    def step(self, gradients):
        self.t += 1
        lr_t = self.lr * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for p, g, m, v in zip(self.parameters, gradients, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr_t * m / (np.sqrt(v) + self.eps)
