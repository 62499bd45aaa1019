"""SGD with momentum and Adam over Parameter lists.

step() applies the update to every unfrozen parameter, then zeroes every
gradient (frozen ones included, since they may have accumulated). Non-finite
gradients abort before any parameter is touched.
"""

from __future__ import annotations

import numpy as np

from ..errors import QuadcodeError
from .layers import Parameter


class NonFiniteGradientError(QuadcodeError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient in parameter {name!r}")
        self.name = name


def _check_finite(params: list[Parameter]) -> None:
    for p in params:
        if not p.frozen and not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradientError(p.name)


class Sgd:
    """v <- momentum*v + g; w <- w - lr*v."""

    def __init__(self, params: list[Parameter], lr: float, momentum: float = 0.0):
        if lr <= 0.0:
            raise QuadcodeError(f"learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise QuadcodeError(f"momentum must be in [0, 1), got {momentum}")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        _check_finite(self.params)
        for p, v in zip(self.params, self._velocity):
            if not p.frozen:
                v *= self.momentum
                v += p.grad
                p.value -= self.lr * v
            p.zero_grad()


class Adam:
    """Bias-corrected Adam (Kingma & Ba defaults)."""

    def __init__(
        self,
        params: list[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if lr <= 0.0:
            raise QuadcodeError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        _check_finite(self.params)
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if not p.frozen:
                m *= self.beta1
                m += (1.0 - self.beta1) * p.grad
                v *= self.beta2
                v += (1.0 - self.beta2) * np.square(p.grad)
                p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.zero_grad()


def make_optimizer(
    params: list[Parameter],
    name: str,
    lr: float,
    momentum: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    if name == "sgd":
        return Sgd(params, lr=lr, momentum=momentum)
    if name == "adam":
        return Adam(params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    raise QuadcodeError(f"unknown optimizer {name!r} (want 'sgd' or 'adam')")
