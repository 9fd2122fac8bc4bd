# coding:utf-8

from typing import Optional
from typing import Tuple

import numpy as np

from gridflare.errors import ContractError
from gridflare.grad import Tensor
from gridflare.grad import ops
from gridflare.policy.layers import MASKED

MODES = ("sample", "argmax")


def mask_bias(valid: np.ndarray, dtype=np.float32) -> np.ndarray:
    valid = np.asarray(valid, dtype=bool)
    if not valid.any(axis=-1).all():
        raise ContractError("validity mask allows no action")
    return np.where(valid, 0.0, MASKED).astype(dtype)


def masked_distribution(logits, valid: np.ndarray) -> np.ndarray:
    """Probabilities with invalid entries exactly zero, renormalized."""
    logits = np.asarray(getattr(logits, "data", logits), dtype=np.float64)
    shifted = logits + mask_bias(valid, np.float64)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    probs = np.exp(shifted)
    probs = np.where(np.asarray(valid, dtype=bool), probs, 0.0)
    return probs / probs.sum(axis=-1, keepdims=True)


def masked_log_probs(logits: Tensor, valid: np.ndarray) -> Tensor:
    """Differentiable log-probabilities under the validity mask."""
    return ops.log_softmax(ops.add(logits, mask_bias(valid, logits.dtype)), axis=-1)  # noqa:E501


def act(logits, valid: np.ndarray, mode: str = "sample",
        rng: Optional[np.random.Generator] = None) -> Tuple[int, float, np.ndarray]:  # noqa:E501
    """Pick one action from a single logit row.

    Returns the action, its log-probability and the full masked
    distribution. Sampling draws one uniform number from ``rng``.
    """
    if mode not in MODES:
        raise ContractError(f"unknown action mode {mode!r}")
    probs = masked_distribution(logits, valid)
    if mode == "argmax":
        action = int(np.argmax(probs))
    else:
        if rng is None:
            raise ContractError("sampling needs a random generator")
        cumulative = np.cumsum(probs)
        action = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))  # noqa:E501
        action = min(action, probs.shape[-1] - 1)
    return action, float(np.log(probs[action])), probs
