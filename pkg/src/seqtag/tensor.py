"""Dense float64 numeric core.

Values are plain numpy arrays: row-major, float64, rank 1 to 3. Every
function here is pure; nothing mutates its arguments. The stable
primitives (sigmoid, log_sum_exp, softmax) are safe for arguments with
magnitudes up to about 1e300.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DimensionError

Array = np.ndarray

# exp() overflows just past this, so sigmoid clamps its argument here;
# the result is still exact for every |x| below the clamp
_EXP_CLAMP = 709.0


def tensor(data, shape: Sequence[int] | None = None) -> Array:
    """Validating constructor: float64, C-order, rank 1..3, all finite.

    ``data`` may be nested sequences or a flat sequence plus an explicit
    ``shape``. Raises DimensionError for rank/shape problems and
    ValueError for non-finite elements.
    """
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        expected = math.prod(shape)
        if arr.size != expected:
            raise DimensionError(
                f"data has {arr.size} elements, shape {shape} needs {expected}"
            )
        arr = arr.reshape(shape)
    if not 1 <= arr.ndim <= 3:
        raise DimensionError(f"rank must be 1..3, got {arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError("tensor elements must be finite")
    return np.ascontiguousarray(arr)


def matmul(a: Array, b: Array) -> Array:
    """Matrix product of two rank-2 arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(
            f"matmul needs two matrices, got ranks {a.ndim} and {b.ndim}"
        )
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def sigmoid(x) -> Array:
    x = np.asarray(x, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-np.clip(x, -_EXP_CLAMP, _EXP_CLAMP)))


def tanh(x) -> Array:
    return np.tanh(np.asarray(x, dtype=np.float64))


def relu(x) -> Array:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}


def activation(kind: str, x) -> Array:
    """Apply a named activation elementwise."""
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(
            f"unknown activation {kind!r}, expected one of {sorted(ACTIVATIONS)}"
        ) from None
    return fn(x)


def log_sum_exp(v, axis: int | None = None):
    """log(sum(exp(v))), computed via the max-shift identity.

    With ``axis=None`` (the default) reduces everything and returns a float;
    otherwise reduces one axis of a matrix and returns an array.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_sum_exp needs at least one element")
    if axis is None:
        m = float(np.max(v))
        return m + math.log(float(np.sum(np.exp(v - m))))
    m = np.max(v, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(v - m), axis=axis))


def softmax(v) -> Array:
    """Normalized exponentials of a vector, stable under large offsets."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"softmax expects a vector, got rank {v.ndim}")
    if v.size == 0:
        raise ValueError("softmax needs at least one element")
    return np.exp(v - log_sum_exp(v))
