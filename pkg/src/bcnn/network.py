"""The fixed conv-pool-conv-pool-dense-dense classifier.

Pipeline for the default geometry::

    [3,80,100] -conv9x9+tanh-> [32,80,100] -pool-> [32,40,50]
               -conv9x9+tanh-> [64,40,50]  -pool-> [64,20,25]
               -flatten-> 32000 -dropout-> dense+tanh -> n6
               -dropout-> dense -> 4 -softmax-> probabilities
"""

from dataclasses import dataclass, field

import numpy as np

from . import layers
from .data import CLASS_NAMES
from .errors import ConfigError, ShapeError, StateError
from .layers import ConvParams, DenseParams

DEFAULT_DROPOUT = 0.1

PARAM_NAMES = (
    "conv1.weight", "conv1.bias",
    "conv2.weight", "conv2.bias",
    "dense1.weight", "dense1.bias",
    "dense2.weight", "dense2.bias",
)


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple = (3, 80, 100)
    conv1_filters: int = 32
    conv2_filters: int = 64
    kernel_size: int = 9
    n6: int = 64
    n_classes: int = 4

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        c, h, w = self.input_shape
        if min(c, h, w, self.conv1_filters, self.conv2_filters, self.n6, self.n_classes) < 1:
            raise ConfigError(f"all extents must be positive: {self}")
        if h % 4 or w % 4:
            raise ConfigError(f"input height and width must be divisible by 4, got {h}x{w}")
        if self.kernel_size % 2 == 0:
            raise ConfigError("kernel size must be odd for same padding")

    @classmethod
    def tiny(cls, input_shape=(1, 8, 8), filters=2, n6=3):
        """Small geometry used for gradient checks and fast tests."""
        return cls(input_shape=tuple(input_shape), conv1_filters=filters,
                   conv2_filters=filters, n6=n6)

    @property
    def flat_size(self):
        _, h, w = self.input_shape
        return self.conv2_filters * (h // 4) * (w // 4)

    def shape_chain(self):
        """Tensor shapes at every layer boundary, input to probabilities."""
        c, h, w = self.input_shape
        return [
            (c, h, w),
            (self.conv1_filters, h, w),
            (self.conv1_filters, h // 2, w // 2),
            (self.conv2_filters, h // 2, w // 2),
            (self.conv2_filters, h // 4, w // 4),
            (self.flat_size,),
            (self.n6,),
            (self.n_classes,),
        ]

    def param_shapes(self):
        c = self.input_shape[0]
        k = self.kernel_size
        return {
            "conv1.weight": (self.conv1_filters, c, k, k),
            "conv1.bias": (self.conv1_filters,),
            "conv2.weight": (self.conv2_filters, self.conv1_filters, k, k),
            "conv2.bias": (self.conv2_filters,),
            "dense1.weight": (self.n6, self.flat_size),
            "dense1.bias": (self.n6,),
            "dense2.weight": (self.n_classes, self.n6),
            "dense2.bias": (self.n_classes,),
        }

    def parameter_count(self):
        return sum(int(np.prod(s)) for s in self.param_shapes().values())


class Model:
    """Architecture plus the trainable tensors, keyed by ``PARAM_NAMES``."""

    def __init__(self, spec, params, class_names=None):
        class_names = tuple(class_names or CLASS_NAMES[:spec.n_classes])
        if len(class_names) != spec.n_classes:
            raise ConfigError(f"{len(class_names)} class names for {spec.n_classes} outputs")
        shapes = spec.param_shapes()
        if set(params) != set(shapes):
            raise StateError(f"parameter names {sorted(params)} do not match the network spec")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise ShapeError(f"{name}: expected {shape}, got {params[name].shape}")
        self.spec = spec
        self.class_names = class_names
        self.params = {name: np.ascontiguousarray(params[name], dtype=np.float64)
                       for name in PARAM_NAMES}

    def __repr__(self):
        return f"Model({self.spec}, {self.parameter_count()} parameters)"

    def parameter_count(self):
        return sum(p.size for p in self.params.values())

    def copy(self):
        return Model(self.spec, {k: v.copy() for k, v in self.params.items()}, self.class_names)

    def conv(self, i):
        return ConvParams(self.params[f"conv{i}.weight"], self.params[f"conv{i}.bias"])

    def dense(self, i):
        return DenseParams(self.params[f"dense{i}.weight"], self.params[f"dense{i}.bias"])


def build_model(spec=None, seed=0, class_names=None):
    """Glorot-uniform weights in [-r, r], r = sqrt(6 / (fan_in + fan_out)); zero biases."""
    spec = spec or NetworkSpec()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
            continue
        if len(shape) == 4:
            field_size = shape[2] * shape[3]
            fan_in, fan_out = shape[1] * field_size, shape[0] * field_size
        else:
            fan_in, fan_out = shape[1], shape[0]
        r = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-r, r, size=shape)
    return Model(spec, params, class_names)


@dataclass
class ForwardTrace:
    """Every intermediate of one forward pass, kept for backpropagation."""

    spec: NetworkSpec
    input: np.ndarray
    conv1: np.ndarray        # tanh output
    pool1: np.ndarray
    pool1_mask: layers.PoolMask
    conv2: np.ndarray
    pool2: np.ndarray
    pool2_mask: layers.PoolMask
    drop1: np.ndarray        # dropped flatten, input to dense1
    drop1_mask: layers.DropoutMask
    dense1: np.ndarray       # tanh output
    drop2: np.ndarray
    drop2_mask: layers.DropoutMask
    logits: np.ndarray
    probs: np.ndarray
    pre_activations: dict = field(default_factory=dict)


def _expect(arr, shape, where):
    if arr.shape != tuple(shape):
        raise ShapeError(f"{where}: expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def forward(model, x, mode="infer", rng=None, dropout_rate=DEFAULT_DROPOUT):
    """Run one sample through the network. ``mode`` is "train" or "infer"."""
    if mode not in ("train", "infer"):
        raise ConfigError(f"mode must be 'train' or 'infer', got {mode!r}")
    training = mode == "train"
    chain = model.spec.shape_chain()
    x = _expect(np.ascontiguousarray(x, dtype=np.float64), chain[0], "input")

    u1 = layers.conv2d_forward(x, model.conv(1))
    a1 = _expect(layers.tanh_forward(u1), chain[1], "conv1")
    p1, m1 = layers.maxpool_forward(a1)
    _expect(p1, chain[2], "pool1")
    u2 = layers.conv2d_forward(p1, model.conv(2))
    a2 = _expect(layers.tanh_forward(u2), chain[3], "conv2")
    p2, m2 = layers.maxpool_forward(a2)
    _expect(p2, chain[4], "pool2")

    flat = p2.reshape(-1)
    d1, dm1 = layers.dropout_apply(flat, dropout_rate, rng, training)
    u3 = layers.dense_forward(d1, model.dense(1))
    a3 = _expect(layers.tanh_forward(u3), chain[6], "dense1")
    d2, dm2 = layers.dropout_apply(a3, dropout_rate, rng, training)
    logits = _expect(layers.dense_forward(d2, model.dense(2)), chain[7], "dense2")
    probs = layers.softmax(logits)

    return ForwardTrace(
        spec=model.spec, input=x, conv1=a1, pool1=p1, pool1_mask=m1,
        conv2=a2, pool2=p2, pool2_mask=m2, drop1=d1, drop1_mask=dm1,
        dense1=a3, drop2=d2, drop2_mask=dm2, logits=logits, probs=probs,
        pre_activations={"conv1": u1, "conv2": u2, "dense1": u3, "dense2": logits},
    )


def output_delta(probs, label):
    """Gradient of cross-entropy(softmax(z)) with respect to z: y - onehot(label)."""
    delta = np.array(probs, dtype=np.float64)
    delta[label] -= 1.0
    return delta


def backward(model, trace, label):
    """Per-parameter gradients of -log(probs[label]) for one traced sample."""
    if trace.spec != model.spec:
        raise StateError("trace was produced by a model with a different spec")
    n_classes = model.spec.n_classes
    if not 0 <= int(label) < n_classes:
        raise ConfigError(f"label {label} outside 0..{n_classes - 1}")

    delta = output_delta(trace.probs, int(label))
    g_d2, g_w4, g_b4 = layers.dense_backward(trace.drop2, model.dense(2), delta)
    g = layers.dropout_backward(trace.drop2_mask, g_d2)
    g = layers.tanh_backward(trace.dense1, g)
    g_d1, g_w3, g_b3 = layers.dense_backward(trace.drop1, model.dense(1), g)
    g = layers.dropout_backward(trace.drop1_mask, g_d1).reshape(trace.pool2.shape)
    g = layers.maxpool_backward(trace.pool2_mask, g)
    g = layers.tanh_backward(trace.conv2, g)
    g, g_w2, g_b2 = layers.conv2d_backward(trace.pool1, model.conv(2), g)
    g = layers.maxpool_backward(trace.pool1_mask, g)
    g = layers.tanh_backward(trace.conv1, g)
    _, g_w1, g_b1 = layers.conv2d_backward(trace.input, model.conv(1), g, need_input=False)

    return {
        "conv1.weight": g_w1, "conv1.bias": g_b1,
        "conv2.weight": g_w2, "conv2.bias": g_b2,
        "dense1.weight": g_w3, "dense1.bias": g_b3,
        "dense2.weight": g_w4, "dense2.bias": g_b4,
    }
