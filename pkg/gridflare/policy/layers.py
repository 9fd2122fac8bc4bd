# coding:utf-8

import math
from typing import Dict
from typing import Optional
from typing import Tuple

import numpy as np

from gridflare.grad import ops
from gridflare.grad import Tensor

Params = Dict[str, Tensor]

# additive attention bias for masked keys; exp() of it underflows to exactly 0
MASKED = -1e9


def linear_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:  # noqa:E501
    return rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_in, fan_out))


def add_block(params: Params, rng: np.random.Generator, prefix: str, d_model: int, mlp_ratio: int) -> None:  # noqa:E501
    """Parameters of one pre-norm transformer block."""
    hidden = d_model * mlp_ratio
    shapes = {
        "ln1.gain": np.ones(d_model), "ln1.bias": np.zeros(d_model),
        "attn.wq": linear_init(rng, d_model, d_model),
        "attn.wk": linear_init(rng, d_model, d_model),
        "attn.wv": linear_init(rng, d_model, d_model),
        "attn.wo": linear_init(rng, d_model, d_model) / 2.0,
        "attn.bo": np.zeros(d_model),
        "ln2.gain": np.ones(d_model), "ln2.bias": np.zeros(d_model),
        "mlp.w1": linear_init(rng, d_model, hidden), "mlp.b1": np.zeros(hidden),  # noqa:E501
        "mlp.w2": linear_init(rng, hidden, d_model) / 2.0, "mlp.b2": np.zeros(d_model),  # noqa:E501
    }
    for name, value in shapes.items():
        params[f"{prefix}.{name}"] = Tensor(value, requires_grad=True, dtype=np.float32)  # noqa:E501


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:  # noqa:E501
    out = ops.matmul(x, weight)
    return out if bias is None else ops.add(out, bias)


def split_heads(x: Tensor, heads: int) -> Tensor:
    """[..., L, d] -> [..., heads, L, d / heads]"""
    *lead, length, width = x.shape
    x = ops.reshape(x, (*lead, length, heads, width // heads))
    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]
    return ops.transpose(x, axes)


def merge_heads(x: Tensor) -> Tensor:
    *lead, heads, length, width = x.shape
    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]
    return ops.reshape(ops.transpose(x, axes), (*lead, length, heads * width))


def attend(q: Tensor, k: Tensor, v: Tensor, bias: Optional[np.ndarray]) -> Tensor:  # noqa:E501
    """Scaled dot-product attention over [..., heads, L, dh] tensors.

    ``bias`` is added to the scores and broadcast over the head axis.
    """
    axes = list(range(k.ndim - 2)) + [k.ndim - 1, k.ndim - 2]
    scores = ops.scale(ops.matmul(q, ops.transpose(k, axes)), 1.0 / math.sqrt(q.shape[-1]))  # noqa:E501
    if bias is not None:
        scores = ops.add(scores, np.broadcast_to(bias, scores.shape).astype(scores.dtype))  # noqa:E501
    return ops.matmul(ops.softmax(scores, axis=-1), v)


def project_qkv(params: Params, prefix: str, x: Tensor, heads: int) -> Tuple[Tensor, Tensor, Tensor]:  # noqa:E501
    h = ops.layer_norm(x, params[f"{prefix}.ln1.gain"], params[f"{prefix}.ln1.bias"])  # noqa:E501
    return tuple(split_heads(ops.matmul(h, params[f"{prefix}.attn.{name}"]), heads) for name in ("wq", "wk", "wv"))  # type: ignore[return-value]  # noqa:E501


def finish_block(params: Params, prefix: str, x: Tensor, context: Tensor) -> Tensor:  # noqa:E501
    """Residual attention output, then the residual MLP."""
    x = ops.add(x, linear(merge_heads(context), params[f"{prefix}.attn.wo"], params[f"{prefix}.attn.bo"]))  # noqa:E501
    h = ops.layer_norm(x, params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"])  # noqa:E501
    h = ops.relu(linear(h, params[f"{prefix}.mlp.w1"], params[f"{prefix}.mlp.b1"]))  # noqa:E501
    return ops.add(x, linear(h, params[f"{prefix}.mlp.w2"], params[f"{prefix}.mlp.b2"]))  # noqa:E501


def block(params: Params, prefix: str, x: Tensor, heads: int, bias: Optional[np.ndarray]) -> Tensor:  # noqa:E501
    q, k, v = project_qkv(params, prefix, x, heads)
    return finish_block(params, prefix, x, attend(q, k, v, bias))


def sinusoid(steps, d_model: int) -> np.ndarray:
    """Sinusoidal encodings of integer time steps, shape [len(steps), d_model]."""  # noqa:E501
    steps = np.asarray(steps, dtype=np.float64).reshape(-1, 1)
    rates = np.exp(-math.log(10000.0) * np.arange(0, d_model, 2, dtype=np.float64) / d_model)  # noqa:E501
    table = np.zeros((steps.shape[0], d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(steps * rates)
    table[:, 1::2] = np.cos(steps * rates)
    return table.astype(np.float32)


def segment_bias(segments: np.ndarray, past: int = 0) -> np.ndarray:
    """Causal, block-diagonal bias: row i sees column j iff both share a
    segment and j <= i. ``past`` leading columns belong to the first segment.
    """
    segments = np.asarray(segments)
    length = segments.shape[0]
    allowed = (segments[:, None] == segments[None, :]) & np.tri(length, dtype=bool)  # noqa:E501
    if past:
        prefix = np.repeat((segments == segments[0])[:, None], past, axis=1)
        allowed = np.concatenate([prefix, allowed], axis=1)
    return np.where(allowed, 0.0, MASKED).astype(np.float32)
