"""Dense float64 tensors.

A tensor is a C-contiguous (row-major, last index fastest) ``numpy.ndarray``
of dtype float64. Images are channel-first ``[C, H, W]``.
"""

import numpy as np

from .errors import ShapeError

DTYPE = np.float64


def _check_shape(shape):
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ShapeError(f"all extents must be >= 1, got {list(shape)}")
    return shape


def tensor_new(shape, fill=0.0):
    """Tensor of ``shape`` with every element equal to ``fill``."""
    return np.full(_check_shape(shape), fill, dtype=DTYPE)


def as_tensor(data, shape=None):
    """Coerce ``data`` to a contiguous float64 tensor, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=DTYPE)
    if shape is not None:
        shape = _check_shape(shape)
        if arr.size != int(np.prod(shape)):
            raise ShapeError(f"{arr.size} values cannot fill shape {list(shape)}")
        arr = arr.reshape(shape)
    return arr


def tensor_map(t, f):
    """Apply the scalar function ``f`` to every element.

    Vectorized numpy ufuncs are applied directly; anything else is called
    element by element.
    """
    t = np.asarray(t, dtype=DTYPE)
    if isinstance(f, np.ufunc):
        return f(t).astype(DTYPE, copy=False)
    return np.fromiter((f(v) for v in t.ravel()), dtype=DTYPE, count=t.size).reshape(t.shape)


def tensor_hadamard(a, b):
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard operands differ in shape: {a.shape} vs {b.shape}")
    return a * b


def flat_offset(shape, index):
    """Row-major flat offset of a multi-index."""
    return int(np.ravel_multi_index(tuple(index), tuple(shape)))


def multi_index(shape, offset):
    return tuple(int(i) for i in np.unravel_index(offset, tuple(shape)))
