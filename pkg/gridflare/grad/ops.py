# coding:utf-8

from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from gridflare.errors import DimensionError
from gridflare.errors import NumericError
from gridflare.errors import TargetIndexError
from gridflare.grad.tensor import Backward
from gridflare.grad.tensor import Tape
from gridflare.grad.tensor import Tensor

Operand = Union[Tensor, np.ndarray, float]


def tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, inputs: Sequence[Tensor], backward: Backward) -> Tensor:  # noqa:E501
    output = Tensor(data, dtype=data.dtype if data.dtype == np.float64 else np.float32)  # noqa:E501
    tape = Tape.current()
    if tape is not None and any(item.requires_grad for item in inputs):
        tape.record(inputs, output, backward)
    return output


def _check_suffix(op: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> None:
    # only leading batch dimensions broadcast
    short, long = (a, b) if len(a) <= len(b) else (b, a)
    if long[len(long) - len(short):] != short:
        raise DimensionError(op, a, b)


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    return grad.reshape((-1,) + shape).sum(axis=0) if lead > 0 else grad.reshape(shape)  # noqa:E501


def add(a: Operand, b: Operand) -> Tensor:
    a, b = tensor(a), tensor(b)
    _check_suffix("add", a.shape, b.shape)
    return _result(a.data + b.data, (a, b), lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape)))  # noqa:E501


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = tensor(a), tensor(b)
    _check_suffix("sub", a.shape, b.shape)
    return _result(a.data - b.data, (a, b), lambda g: (_reduce_to(g, a.shape), -_reduce_to(g, b.shape)))  # noqa:E501


def mul(a: Operand, b: Operand) -> Tensor:
    if isinstance(b, (int, float)):
        return scale(a, b)
    if isinstance(a, (int, float)):
        return scale(b, a)
    a, b = tensor(a), tensor(b)
    _check_suffix("mul", a.shape, b.shape)

    def backward(g: np.ndarray):
        return (_reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape))  # noqa:E501

    return _result(a.data * b.data, (a, b), backward)


def scale(a: Operand, factor: float) -> Tensor:
    a = tensor(a)
    factor = a.dtype.type(factor)
    return _result(a.data * factor, (a,), lambda g: (g * factor,))


def matmul(a: Operand, b: Operand) -> Tensor:
    """Matrix product over the last two axes.

    ``b`` is either a plain matrix shared by every leading batch index of
    ``a`` or carries exactly the same batch dimensions.
    """
    a, b = tensor(a), tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul", a.shape, b.shape)
    if b.ndim > 2 and b.shape[:-2] != a.shape[:-2]:
        raise DimensionError("matmul", a.shape, b.shape)

    def backward(g: np.ndarray):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        if b.ndim == 2:
            grad_b = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])  # noqa:E501
        else:
            grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return grad_a, grad_b

    return _result(np.matmul(a.data, b.data), (a, b), backward)


def transpose(a: Operand, axes: Sequence[int]) -> Tensor:
    a = tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _result(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))  # noqa:E501


def reshape(a: Operand, shape: Sequence[int]) -> Tensor:
    a = tensor(a)
    return _result(a.data.reshape(tuple(shape)), (a,), lambda g: (g.reshape(a.shape),))  # noqa:E501


def concat(items: Sequence[Operand], axis: int) -> Tensor:
    items = [tensor(item) for item in items]
    sizes = [item.shape[axis] for item in items]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([item.data for item in items], axis=axis), items, backward)  # noqa:E501


def getitem(a: Operand, key) -> Tensor:
    """Basic (slice and integer) indexing."""
    a = tensor(a)

    def backward(g: np.ndarray):
        grad = np.zeros_like(a.data)
        grad[key] += g
        return (grad,)

    return _result(np.ascontiguousarray(a.data[key]), (a,), backward)


def embedding(table: Operand, indices: np.ndarray) -> Tensor:
    """Rows of ``table`` gathered by integer ``indices`` of any shape."""
    table = tensor(table)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise TargetIndexError(f"embedding: index out of range [0, {table.shape[0]})")  # noqa:E501

    def backward(g: np.ndarray):
        grad = np.zeros_like(table.data)
        np.add.at(grad, indices.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return _result(table.data[indices], (table,), backward)


def pick(a: Operand, indices: np.ndarray) -> Tensor:
    """``a[..., indices[...]]``: one entry of the last axis per leading index."""  # noqa:E501
    a = tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.shape != a.shape[:-1]:
        raise DimensionError("pick", a.shape, indices.shape)
    if indices.size and (indices.min() < 0 or indices.max() >= a.shape[-1]):
        raise TargetIndexError(f"pick: index out of range [0, {a.shape[-1]})")
    expanded = indices[..., None]

    def backward(g: np.ndarray):
        grad = np.zeros_like(a.data)
        np.put_along_axis(grad, expanded, g[..., None], axis=-1)
        return (grad,)

    return _result(np.take_along_axis(a.data, expanded, axis=-1)[..., 0], (a,), backward)  # noqa:E501


def relu(a: Operand) -> Tensor:
    a = tensor(a)
    positive = a.data > 0
    return _result(np.where(positive, a.data, 0).astype(a.dtype), (a,), lambda g: (g * positive,))  # noqa:E501


def exp(a: Operand) -> Tensor:
    a = tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def log(a: Operand) -> Tensor:
    a = tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def minimum(a: Operand, b: Operand) -> Tensor:
    a, b = tensor(a), tensor(b)
    if a.shape != b.shape:
        raise DimensionError("minimum", a.shape, b.shape)
    first = a.data <= b.data
    return _result(np.minimum(a.data, b.data), (a, b), lambda g: (g * first, g * ~first))  # noqa:E501


def clip(a: Operand, low: float, high: float) -> Tensor:
    a = tensor(a)
    inside = (a.data >= low) & (a.data <= high)
    return _result(np.clip(a.data, low, high).astype(a.dtype), (a,), lambda g: (g * inside,))  # noqa:E501


def sum(a: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa:E501 pylint: disable=redefined-builtin
    a = tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims, dtype=np.float64).astype(a.dtype)  # noqa:E501

    def backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    return _result(np.asarray(out), (a,), backward)


def mean(a: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa:E501
    a = tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def _check_finite(op: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{op}: non-finite input")


def softmax(logits: Operand, axis: int = -1) -> Tensor:
    logits = tensor(logits)
    _check_finite("softmax", logits.data)
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    weights = np.exp(shifted)
    out = (weights / weights.sum(axis=axis, keepdims=True)).astype(logits.dtype)  # noqa:E501

    def backward(g: np.ndarray):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (logits,), backward)


def log_softmax(logits: Operand, axis: int = -1) -> Tensor:
    logits = tensor(logits)
    _check_finite("log_softmax", logits.data)
    shifted = logits.data.astype(np.float64)
    shifted = shifted - shifted.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(out)

    def backward(g: np.ndarray):
        return ((g - probs * np.sum(g, axis=axis, keepdims=True)).astype(logits.dtype),)  # noqa:E501

    return _result(out.astype(logits.dtype), (logits,), backward)


def layer_norm(x: Operand, gain: Operand, bias: Operand, eps: float = 1e-5) -> Tensor:  # noqa:E501
    """Normalize the last axis to zero mean and unit variance, then scale and shift.

    A single-element axis has zero variance and normalizes to zeros, so the
    result is just ``bias``.
    """
    x, gain, bias = tensor(x), tensor(gain), tensor(bias)
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise DimensionError("layer_norm", x.shape, gain.shape)
    wide = x.data.astype(np.float64)
    centered = wide - wide.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)  # noqa:E501
    normed = centered * inv_std
    out = (normed * gain.data + bias.data).astype(x.dtype)

    def backward(g: np.ndarray):
        g = g.astype(np.float64)
        grad_normed = g * gain.data
        grad_x = inv_std * (grad_normed - grad_normed.mean(axis=-1, keepdims=True) - normed * (grad_normed * normed).mean(axis=-1, keepdims=True))  # noqa:E501
        width = x.shape[-1]
        grad_gain = (g * normed).reshape(-1, width).sum(axis=0)
        grad_bias = g.reshape(-1, width).sum(axis=0)
        return grad_x.astype(x.dtype), grad_gain.astype(gain.dtype), grad_bias.astype(bias.dtype)  # noqa:E501

    return _result(out, (x, gain, bias), backward)


def cross_entropy(logits: Operand, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under ``softmax(logits)``."""  # noqa:E501
    logits = tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != logits.shape[:1]:
        raise DimensionError("cross_entropy", logits.shape, targets.shape)
    classes = logits.shape[1]
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        raise TargetIndexError(f"cross_entropy: target out of range [0, {classes})")  # noqa:E501
    _check_finite("cross_entropy", logits.data)
    rows = np.arange(targets.size)
    shifted = logits.data.astype(np.float64)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[rows, targets].mean()

    def backward(g: np.ndarray):
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        return ((grad * (float(g) / targets.size)).astype(logits.dtype),)

    return _result(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


def entropy(logp: Operand, axis: int = -1) -> Tensor:
    """``-sum(p * log p)`` from log-probabilities."""
    logp = tensor(logp)
    return scale(sum(mul(exp(logp), logp), axis=axis), -1.0)

