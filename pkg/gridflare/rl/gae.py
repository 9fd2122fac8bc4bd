# coding:utf-8

from typing import Tuple

import numpy as np

from gridflare.errors import DimensionError


def compute_gae(rewards, values, bootstrap, dones, gamma: float = 0.99,
                lam: float = 0.95, truncated=None, next_values=None) -> Tuple[np.ndarray, np.ndarray]:  # noqa:E501
    """Advantages and returns over the last axis, any leading worker axes.

    ``dones`` ends an episode at that step. Where ``truncated`` is set the
    episode ran out of time: the step bootstraps from ``next_values`` and
    the recursion still stops there.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if values.shape != rewards.shape or dones.shape != rewards.shape:
        raise DimensionError("compute_gae", rewards.shape, values.shape, dones.shape)  # noqa:E501
    bootstrap = np.broadcast_to(np.asarray(bootstrap, dtype=np.float64), rewards.shape[:-1])  # noqa:E501
    truncated = np.zeros_like(dones) if truncated is None else np.asarray(truncated, dtype=bool)  # noqa:E501
    next_values = np.zeros_like(values) if next_values is None else np.asarray(next_values, dtype=np.float64)  # noqa:E501
    if truncated.shape != rewards.shape or next_values.shape != rewards.shape:
        raise DimensionError("compute_gae", rewards.shape, truncated.shape, next_values.shape)  # noqa:E501
    following = np.concatenate([values[..., 1:], bootstrap[..., None]], axis=-1)  # noqa:E501
    following = np.where(truncated, next_values, np.where(dones, 0.0, following))  # noqa:E501
    deltas = rewards + gamma * following - values
    carry = np.where(dones, 0.0, gamma * lam)
    advantages = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[:-1], dtype=np.float64)
    for t in range(rewards.shape[-1] - 1, -1, -1):
        running = deltas[..., t] + carry[..., t] * running
        advantages[..., t] = running
    return advantages, advantages + values


def normalize_advantages(advantages, epsilon: float = 1e-8, enabled: bool = True) -> np.ndarray:  # noqa:E501
    advantages = np.asarray(advantages, dtype=np.float64)
    if not enabled or advantages.size < 2:
        return advantages
    return (advantages - advantages.mean()) / (advantages.std() + epsilon)
