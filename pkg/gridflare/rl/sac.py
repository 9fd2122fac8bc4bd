# coding:utf-8

from dataclasses import asdict
from dataclasses import dataclass
from typing import Dict
from typing import Optional

import numpy as np

from gridflare.errors import ContractError
from gridflare.grad import AdamState
from gridflare.grad import Tape
from gridflare.grad import Tensor
from gridflare.grad import backward
from gridflare.grad import clip_grad_norm
from gridflare.grad import ops
from gridflare.house.tokens import OBSERVATION_TOKENS
from gridflare.policy.act import masked_distribution
from gridflare.policy.act import masked_log_probs
from gridflare.policy.network import CRITIC_HEAD_SCALE
from gridflare.policy.network import PolicyNet
from gridflare.rl.config import TrainConfig
from gridflare.rl.rollout import RolloutBatch


class ReplayBuffer():
    """Ring buffer of single transitions with seeded uniform sampling."""

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 1:
            raise ContractError(f"capacity must be positive, got {capacity}")
        self.__capacity: int = capacity
        self.__rng: np.random.Generator = np.random.default_rng([seed, 5])
        self.__tokens = np.zeros((capacity, OBSERVATION_TOKENS), dtype=np.int64)  # noqa:E501
        self.__next_tokens = np.zeros_like(self.__tokens)
        self.__prev_actions = np.zeros(capacity, dtype=np.int64)
        self.__actions = np.zeros(capacity, dtype=np.int64)
        self.__steps = np.zeros(capacity, dtype=np.int64)
        self.__rewards = np.zeros(capacity, dtype=np.float64)
        self.__terminals = np.zeros(capacity, dtype=bool)
        self.__cursor: int = 0
        self.__size: int = 0

    def __len__(self) -> int:
        return self.__size

    @property
    def capacity(self) -> int:
        return self.__capacity

    def add(self, tokens, prev_action: int, step: int, action: int, reward: float,  # noqa:E501
            next_tokens, terminal: bool) -> None:
        index = self.__cursor
        self.__tokens[index] = tokens
        self.__next_tokens[index] = next_tokens
        self.__prev_actions[index] = prev_action
        self.__steps[index] = step
        self.__actions[index] = action
        self.__rewards[index] = reward
        self.__terminals[index] = terminal
        self.__cursor = (index + 1) % self.__capacity
        self.__size = min(self.__size + 1, self.__capacity)

    def add_batch(self, batch: RolloutBatch) -> None:
        terminals = batch.dones & ~batch.truncated
        for w in range(batch.workers):
            for t in range(batch.horizon):
                self.add(batch.tokens[w, t], int(batch.prev_actions[w, t]), int(batch.steps[w, t]),  # noqa:E501
                         int(batch.actions[w, t]), float(batch.rewards[w, t]),
                         batch.next_tokens[w, t], bool(terminals[w, t]))

    def sample(self, count: int) -> Dict[str, np.ndarray]:
        if count > self.__size:
            raise ContractError(f"cannot sample {count} of {self.__size} transitions")  # noqa:E501
        index = self.__rng.integers(0, self.__size, size=count)
        return {"tokens": self.__tokens[index], "prev_actions": self.__prev_actions[index],  # noqa:E501
                "steps": self.__steps[index], "actions": self.__actions[index],
                "rewards": self.__rewards[index], "next_tokens": self.__next_tokens[index],  # noqa:E501
                "terminals": self.__terminals[index]}


@dataclass(frozen=True)
class SACStats:
    critic_loss: float
    actor_loss: float
    mean_q: float
    entropy: float
    grad_norm_actor: float
    grad_norm_critic: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def soft_values(probs: np.ndarray, log_probs: np.ndarray, q: np.ndarray, alpha: float) -> np.ndarray:  # noqa:E501
    """``sum_a pi(a|s) (Q(s, a) - alpha log pi(a|s))`` over valid actions."""
    inner = np.where(probs > 0, q - alpha * log_probs, 0.0)
    return np.sum(probs * inner, axis=-1)


def critic_targets(rewards, terminals, next_probs, next_log_probs, next_q1, next_q2,  # noqa:E501
                   gamma: float, alpha: float) -> np.ndarray:
    following = soft_values(next_probs, next_log_probs, np.minimum(next_q1, next_q2), alpha)  # noqa:E501
    return np.asarray(rewards, dtype=np.float64) + gamma * (1.0 - np.asarray(terminals, dtype=np.float64)) * following  # noqa:E501


def critic_loss(q: Tensor, actions, targets) -> Tensor:
    diff = ops.sub(ops.pick(q, np.asarray(actions, dtype=np.int64)), np.asarray(targets, dtype=q.dtype))  # noqa:E501
    return ops.scale(ops.mean(ops.mul(diff, diff)), 0.5)


def actor_loss(log_probs: Tensor, q_min: np.ndarray, alpha: float) -> Tensor:
    """``mean_s sum_a pi(a|s) (alpha log pi(a|s) - min Q(s, a))``."""
    probs = ops.exp(log_probs)
    inner = ops.sub(ops.scale(log_probs, alpha), np.asarray(q_min, dtype=log_probs.dtype))  # noqa:E501
    return ops.mean(ops.sum(ops.mul(probs, inner), axis=-1))


def polyak_update(target: PolicyNet, online: PolicyNet, tau: float) -> None:
    for name, param in target.params.items():
        param.assign(tau * online.params[name].data + (1.0 - tau) * param.data)


def q_network(source: PolicyNet, seed: int = 0) -> PolicyNet:
    """A Q network on the pretrained trunk with a fresh 20-way head."""
    net = source.copy()
    rng = np.random.default_rng([seed, 29])
    weight = net.params["head.actor.weight"]
    weight.assign(rng.uniform(-CRITIC_HEAD_SCALE, CRITIC_HEAD_SCALE, size=weight.shape))  # noqa:E501
    net.params["head.actor.bias"].assign(np.zeros(net.params["head.actor.bias"].shape))  # noqa:E501
    return net


def _logits(net: PolicyNet, tokens: np.ndarray, prev_actions: np.ndarray, steps: np.ndarray) -> Tensor:  # noqa:E501
    # every transition is its own single-step segment
    states = net.encode_state(tokens)
    beliefs = net.full_forward(states, prev_actions, steps, np.arange(tokens.shape[0]))  # noqa:E501
    return net.actor_logits(beliefs)


def sac_update(actor: PolicyNet, q1: PolicyNet, q2: PolicyNet, q1_target: PolicyNet,  # noqa:E501
               q2_target: PolicyNet, buffer: ReplayBuffer, config: TrainConfig,
               optimizers: Dict[str, AdamState], valid: np.ndarray,
               gamma: Optional[float] = None) -> SACStats:
    """Discrete soft actor-critic step with a fixed temperature."""
    alpha = config.sac_alpha
    gamma = config.gamma if gamma is None else gamma
    sample = buffer.sample(config.sac_batch)
    count = sample["actions"].shape[0]
    valid = np.broadcast_to(valid, (count, valid.shape[-1]))
    next_prev = sample["actions"]
    next_steps = sample["steps"] + 1
    next_logits = _logits(actor, sample["next_tokens"], next_prev, next_steps).data  # noqa:E501
    next_probs = masked_distribution(next_logits, valid)
    next_logp = np.log(np.where(next_probs > 0, next_probs, 1.0))
    targets = critic_targets(sample["rewards"], sample["terminals"], next_probs, next_logp,  # noqa:E501
                             _logits(q1_target, sample["next_tokens"], next_prev, next_steps).data,  # noqa:E501
                             _logits(q2_target, sample["next_tokens"], next_prev, next_steps).data,  # noqa:E501
                             gamma, alpha)
    losses = []
    critic_norm = 0.0
    q_values = []
    for name, net in (("q1", q1), ("q2", q2)):
        net.zero_grad()
        with Tape():
            q = _logits(net, sample["tokens"], sample["prev_actions"], sample["steps"])  # noqa:E501
            loss = critic_loss(q, sample["actions"], targets)
            backward(loss)
        losses.append(loss.item())
        q_values.append(q.data)
        critic_norm = max(critic_norm, clip_grad_norm(net.params.values(), config.max_grad_norm))  # noqa:E501
        optimizers[name].step(net.params)
    q_min = np.minimum(*q_values)
    actor.zero_grad()
    with Tape():
        logp = masked_log_probs(_logits(actor, sample["tokens"], sample["prev_actions"], sample["steps"]), valid)  # noqa:E501
        policy = actor_loss(logp, q_min, alpha)
        backward(policy)
    actor_norm = clip_grad_norm(actor.params.values(), config.max_grad_norm)
    optimizers["actor"].step(actor.params)
    polyak_update(q1_target, q1, config.sac_tau)
    polyak_update(q2_target, q2, config.sac_tau)
    probs = np.exp(logp.data.astype(np.float64))
    entropy = float(-np.mean(np.sum(np.where(probs > 0, probs * logp.data, 0.0), axis=-1)))  # noqa:E501
    return SACStats(critic_loss=float(np.mean(losses)), actor_loss=policy.item(),  # noqa:E501
                    mean_q=float(np.mean(np.take_along_axis(q_min, sample["actions"][:, None], axis=-1))),  # noqa:E501
                    entropy=entropy, grad_norm_actor=actor_norm, grad_norm_critic=critic_norm)  # noqa:E501
