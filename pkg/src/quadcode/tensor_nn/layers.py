"""Layer objects: named parameters plus stateless forward/backward pairs.

forward(x, ctx) returns (output, cache); backward(cache, grad) accumulates
into Parameter.grad and returns the gradient w.r.t. the layer input. Caches
live with the caller, so evaluation-mode forwards are pure and can run on
many threads while training (the only grad writer) stays single-threaded.

Layers reach ops through the module attribute (`ops.conv1d` etc.), which is
what lets the gradcheck negative-control test swap a backward out from under
a model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import QuadcodeError
from . import ops


@dataclass
class Parameter:
    """A trainable array and its gradient accumulator.

    pinned marks coordinates held at a fixed value by construction (the PAD
    embedding row); their analytic gradient is defined as zero and gradient
    checks must not perturb them.
    """

    name: str
    value: np.ndarray
    frozen: bool = False
    pinned: np.ndarray | None = None
    grad: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


@dataclass(frozen=True)
class PassContext:
    """Per-forward switches: training flag and the dropout generator."""

    training: bool = False
    rng: np.random.Generator | None = None


EVAL = PassContext(training=False, rng=None)


def glorot_uniform(gen: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, size=shape)


class Embedding:
    """Index lookup into a (V, d) table, emitting (d, L) feature maps.

    The PAD row (index pad_index) takes no gradient, so it stays exactly
    zero through any number of updates.
    """

    def __init__(self, table: np.ndarray, trainable: bool = True, pad_index: int = 0, name: str = "embedding"):
        pinned = np.zeros(np.asarray(table).shape, dtype=bool)
        pinned[pad_index, :] = True
        self.param = Parameter(name, table, frozen=not trainable, pinned=pinned)
        self.pad_index = pad_index

    @property
    def params(self) -> list[Parameter]:
        return [self.param]

    def forward(self, indices: np.ndarray, ctx: PassContext):
        return ops.embedding_lookup(self.param.value, indices), indices

    def backward(self, cache, grad: np.ndarray) -> None:
        table_grad = ops.embedding_backward(cache, grad, self.param.value.shape)
        table_grad[self.pad_index, :] = 0.0
        self.param.grad += table_grad
        return None  # indices are discrete; nothing flows further back


class Conv1d:
    def __init__(self, in_channels: int, frames: int, kernel: int, gen: np.random.Generator, name: str):
        fan_in = in_channels * kernel
        fan_out = frames * kernel
        self.w = Parameter(f"{name}.w", glorot_uniform(gen, (frames, in_channels, kernel), fan_in, fan_out))
        self.b = Parameter(f"{name}.b", np.zeros(frames))

    @property
    def params(self) -> list[Parameter]:
        return [self.w, self.b]

    def forward(self, x: np.ndarray, ctx: PassContext):
        return ops.conv1d(x, self.w.value, self.b.value), x

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        grad_x, grad_w, grad_b = ops.conv1d_backward(cache, self.w.value, grad)
        self.w.grad += grad_w
        self.b.grad += grad_b
        return grad_x


class Dense:
    def __init__(self, in_features: int, units: int, gen: np.random.Generator, name: str):
        self.w = Parameter(f"{name}.w", glorot_uniform(gen, (units, in_features), in_features, units))
        self.b = Parameter(f"{name}.b", np.zeros(units))

    @property
    def params(self) -> list[Parameter]:
        return [self.w, self.b]

    def forward(self, x: np.ndarray, ctx: PassContext):
        return ops.dense(x, self.w.value, self.b.value), x

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        grad_x, grad_w, grad_b = ops.dense_backward(cache, self.w.value, grad)
        self.w.grad += grad_w
        self.b.grad += grad_b
        return grad_x


class ReLU:
    params: list[Parameter] = []

    def forward(self, x: np.ndarray, ctx: PassContext):
        return ops.relu(x), x

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        return ops.relu_backward(cache, grad)


class MaxPool1d:
    params: list[Parameter] = []

    def __init__(self, width: int):
        if width < 1:
            raise QuadcodeError(f"pool width must be >= 1, got {width}")
        self.width = width

    def forward(self, x: np.ndarray, ctx: PassContext):
        y, argmax = ops.maxpool1d_with_argmax(x, self.width)
        return y, (argmax, x.shape[1])

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        argmax, in_length = cache
        return ops.maxpool1d_backward(grad, argmax, in_length)


class Dropout:
    params: list[Parameter] = []

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise QuadcodeError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: np.ndarray, ctx: PassContext):
        y, mask = ops.dropout(x, self.rate, ctx.rng, ctx.training)
        return y, mask

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        return ops.dropout_backward(cache, grad)


class Flatten:
    params: list[Parameter] = []

    def forward(self, x: np.ndarray, ctx: PassContext):
        return ops.flatten(x), x.shape

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        return ops.flatten_backward(cache, grad)
