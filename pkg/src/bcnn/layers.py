"""Forward and backward passes for each layer kind in the classifier.

Every function is pure: inputs are never modified and all state needed for
the backward pass (pool argmax indices, dropout masks) is returned
explicitly.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._backend import kernels
from .errors import ConfigError, ShapeError
from .tensor import DTYPE

KERNEL_SIZE = 9


@dataclass
class ConvParams:
    """Weights ``[out_ch, in_ch, k, k]`` and bias ``[out_ch]``; stride 1, same padding."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w, b = self.weights, self.bias
        if w.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[2] % 2 == 0:
            raise ShapeError(f"conv weights must be [out, in, k, k] with odd k, got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"conv bias shape {b.shape} does not match {w.shape[0]} filters")

    @property
    def padding(self):
        return self.weights.shape[2] // 2


@dataclass
class DenseParams:
    """Weights ``[out_features, in_features]`` and bias ``[out_features]``."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"dense weights {self.weights.shape} and bias {self.bias.shape} disagree"
            )


@dataclass
class PoolMask:
    # flat offset into the pooled input of each selected maximum, shaped like the output
    indices: np.ndarray
    input_shape: tuple


@dataclass
class DropoutMask:
    # 0 for dropped elements, 1/(1-rate) for kept ones
    scale: np.ndarray
    rate: float


def _f64(a):
    return np.ascontiguousarray(a, dtype=DTYPE)


def conv2d_forward(inp, p):
    inp = _f64(inp)
    if inp.ndim != 3 or inp.shape[0] != p.weights.shape[1]:
        raise ShapeError(
            f"conv expects [{p.weights.shape[1]}, H, W] input, got {list(inp.shape)}"
        )
    pad = p.padding
    padded = np.pad(inp, ((0, 0), (pad, pad), (pad, pad)))
    return kernels.conv2d_forward(padded, _f64(p.weights), _f64(p.bias))


def conv2d_backward(inp, p, grad_out, need_input=True):
    """Gradients of a same-padded convolution.

    Returns ``(grad_input, grad_weights, grad_bias)``; ``grad_input`` is None
    when ``need_input`` is false (the first layer never needs it).
    """
    inp = _f64(inp)
    grad_out = _f64(grad_out)
    n_out, n_in, k, _ = p.weights.shape
    if inp.ndim != 3 or inp.shape[0] != n_in:
        raise ShapeError(f"conv expects [{n_in}, H, W] input, got {list(inp.shape)}")
    if grad_out.shape != (n_out,) + inp.shape[1:]:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} != forward output {(n_out,) + inp.shape[1:]}"
        )
    pad = p.padding
    padded = np.pad(inp, ((0, 0), (pad, pad), (pad, pad)))
    grad_bias = grad_out.sum(axis=(1, 2))
    # windows: [C, H, W, k, k]
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))
    grad_weights = np.tensordot(grad_out, windows, axes=([1, 2], [1, 2]))
    grad_input = None
    if need_input:
        h, w = inp.shape[1:]
        gp = kernels.conv2d_backward_input(grad_out, _f64(p.weights))
        grad_input = np.ascontiguousarray(gp[:, pad:pad + h, pad:pad + w])
    return grad_input, np.ascontiguousarray(grad_weights), grad_bias


def maxpool_forward(inp):
    """2x2 max pooling with stride 2; ties go to the first element in scan order."""
    inp = _f64(inp)
    if inp.ndim != 3 or inp.shape[1] % 2 or inp.shape[2] % 2:
        raise ShapeError(f"max pooling needs [C, even H, even W], got {list(inp.shape)}")
    out, idx = kernels.maxpool_forward(inp)
    return out, PoolMask(idx, inp.shape)


def maxpool_backward(mask, grad_out):
    grad_out = _f64(grad_out)
    if grad_out.shape != mask.indices.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != pooled shape {mask.indices.shape}")
    size = int(np.prod(mask.input_shape))
    return kernels.maxpool_backward(mask.indices, grad_out, size).reshape(mask.input_shape)


def dense_forward(inp, p):
    inp = _f64(inp)
    if inp.shape != (p.weights.shape[1],):
        raise ShapeError(f"dense expects {p.weights.shape[1]} inputs, got {list(inp.shape)}")
    return kernels.dense_forward(inp, _f64(p.weights), _f64(p.bias))


def dense_backward(inp, p, delta):
    inp = _f64(inp)
    delta = _f64(delta)
    if inp.shape != (p.weights.shape[1],) or delta.shape != (p.weights.shape[0],):
        raise ShapeError(
            f"dense backward got input {inp.shape}, delta {delta.shape} "
            f"for weights {p.weights.shape}"
        )
    grad_input = p.weights.T @ delta
    return grad_input, np.outer(delta, inp), delta.copy()


def tanh_forward(u):
    return np.tanh(_f64(u))


def tanh_backward(activated, delta):
    activated = _f64(activated)
    delta = _f64(delta)
    if activated.shape != delta.shape:
        raise ShapeError(f"tanh backward shape mismatch: {activated.shape} vs {delta.shape}")
    return delta * (1.0 - activated) * (1.0 + activated)


def dropout_apply(inp, rate, rng=None, training=True):
    """Inverted dropout. Returns ``(output, mask)``; identity at inference or rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    inp = _f64(inp)
    if not training or rate == 0.0:
        return inp.copy(), DropoutMask(np.ones_like(inp), rate)
    if rng is None:
        raise ConfigError("training-mode dropout needs a random generator")
    keep = rng.random(inp.shape) >= rate
    scale = keep * (1.0 / (1.0 - rate))
    return inp * scale, DropoutMask(scale, rate)


def dropout_backward(mask, grad_out):
    grad_out = _f64(grad_out)
    if grad_out.shape != mask.scale.shape:
        raise ShapeError(f"dropout backward shape mismatch: {grad_out.shape} vs {mask.scale.shape}")
    return grad_out * mask.scale


def softmax(logits):
    z = _f64(logits)
    e = np.exp(z - z.max())
    return e / e.sum()
