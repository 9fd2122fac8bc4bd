# coding:utf-8

from dataclasses import asdict
from dataclasses import dataclass
import math
import os
from typing import Any
from typing import Dict
from typing import Optional
from typing import Tuple

from loguru import logger
import numpy as np

from gridflare.config import write_json
from gridflare.errors import ContractError
from gridflare.errors import NonFiniteLossError
from gridflare.errors import NumericError
from gridflare.grad import AdamState
from gridflare.grad import Tape
from gridflare.grad import Tensor
from gridflare.grad import backward
from gridflare.grad import clip_grad_norm
from gridflare.grad import ops
from gridflare.policy.act import masked_log_probs
from gridflare.policy.network import KVCache
from gridflare.policy.network import PolicyNet
from gridflare.rl.config import CONTEXTS
from gridflare.rl.config import TrainConfig
from gridflare.rl.rollout import RolloutBatch


@dataclass(frozen=True)
class PPOStats:
    policy_loss: float
    value_loss: float
    clip_frac: float
    approx_kl: float
    entropy: float
    grad_norm_actor: float
    grad_norm_critic: float
    # largest |ratio - 1| seen in the first pass after collection
    first_ratio_deviation: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def surrogate(ratio, advantages, clip: float) -> Tensor:
    """Per-sample clipped objective ``min(r A, clip(r, 1-c, 1+c) A)``."""
    ratio = ops.tensor(ratio)
    advantages = np.asarray(advantages, dtype=ratio.dtype)
    return ops.minimum(ops.mul(ratio, advantages), ops.mul(ops.clip(ratio, 1.0 - clip, 1.0 + clip), advantages))  # noqa:E501


def value_error(values: Tensor, returns) -> Tensor:
    """``0.5 * mean((V - R)^2)``."""
    diff = ops.sub(values, np.asarray(returns, dtype=values.dtype))
    return ops.scale(ops.mean(ops.mul(diff, diff)), 0.5)


def prefix_cache(net: PolicyNet, batch: RolloutBatch, worker: int, mode: str) -> Optional[KVCache]:  # noqa:E501
    """Keys and values of the steps before the window, without gradient."""
    if mode != "full" or (prefix := batch.prefix(worker)) is None:
        return None
    tokens, previous = prefix
    return net.replay(tokens, previous, np.arange(previous.shape[0]))


def worker_beliefs(net: PolicyNet, batch: RolloutBatch, worker: int, past: Optional[KVCache] = None) -> Tensor:  # noqa:E501
    states = net.encode_state(batch.tokens[worker])
    return net.full_forward(states, batch.prev_actions[worker], batch.steps[worker], batch.segments(worker), past=past)  # noqa:E501


def policy_terms(actor: PolicyNet, batch: RolloutBatch, worker: int, past: Optional[KVCache] = None) -> Tuple[Tensor, Tensor, Tensor]:  # noqa:E501
    """Log-probabilities of the taken actions, entropies and the beliefs."""
    beliefs = worker_beliefs(actor, batch, worker, past)
    valid = np.broadcast_to(batch.valid, (batch.horizon, batch.valid.shape[-1]))  # noqa:E501
    logp = masked_log_probs(actor.actor_logits(beliefs), valid)
    return ops.pick(logp, batch.actions[worker]), ops.entropy(logp), beliefs


def training_forward(actor: PolicyNet, critic: Optional[PolicyNet], batch: RolloutBatch,  # noqa:E501
                     mode: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:  # noqa:E501
    """Log-probs, values and entropies [W, T] as the update sees them.

    ``window`` attends from the later of episode start and window start;
    ``full`` recomputes the steps before the window under the current
    parameters and lets the first segment attend to them.
    """
    mode = mode or batch.context
    if mode not in CONTEXTS:
        raise ContractError(f"unknown context mode {mode!r}")
    shape = (batch.workers, batch.horizon)
    log_probs, values, entropies = np.zeros(shape), np.zeros(shape), np.zeros(shape)  # noqa:E501
    for w in range(batch.workers):
        logp, entropy, beliefs = policy_terms(actor, batch, w, prefix_cache(actor, batch, w, mode))  # noqa:E501
        log_probs[w], entropies[w] = logp.data, entropy.data
        if critic is actor:
            values[w] = actor.value(beliefs).data
        elif critic is not None:
            values[w] = critic.value(worker_beliefs(critic, batch, w, prefix_cache(critic, batch, w, mode))).data  # noqa:E501
    return log_probs, values, entropies


def _dump(dump_dir: Optional[str], stats: Dict[str, Any]) -> Optional[str]:
    if dump_dir is None:
        return None
    path = os.path.join(dump_dir, "diagnostics.json")
    write_json(path, stats)
    return path


def ppo_update(actor: PolicyNet, critic: PolicyNet, batch: RolloutBatch,
               advantages: np.ndarray, returns: np.ndarray, config: TrainConfig,  # noqa:E501
               actor_optimizer: AdamState, critic_optimizer: Optional[AdamState] = None,  # noqa:E501
               dump_dir: Optional[str] = None) -> PPOStats:
    """Clipped PPO over the full batch for ``config.repeats`` passes.

    With separate networks the actor and the critic get their own backward,
    clipping and Adam step. When ``critic`` is the actor the two losses are
    summed into one step over the shared parameters.
    """
    shared = critic is actor
    if not shared and critic_optimizer is None:
        raise ContractError("separate critic needs its own optimizer")
    totals: Dict[str, float] = {"policy_loss": 0.0, "value_loss": 0.0, "clip_frac": 0.0,  # noqa:E501
                                "approx_kl": 0.0, "entropy": 0.0}
    grad_actor = grad_critic = 0.0
    first_deviation = 0.0
    for repeat in range(config.repeats):
        actor.zero_grad()
        if not shared:
            critic.zero_grad()
        current: Dict[str, float] = dict.fromkeys(totals, 0.0)
        try:
            deviation = _accumulate(actor, critic, batch, advantages, returns, config, current)  # noqa:E501
        except NumericError as error:
            dump = _dump(dump_dir, dict(current, repeat=repeat, error=str(error)))  # noqa:E501
            raise NonFiniteLossError(f"non-finite PPO forward in pass {repeat}", dump) from error  # noqa:E501
        if not all(math.isfinite(value) for value in current.values()):
            dump = _dump(dump_dir, dict(current, repeat=repeat, first_ratio_deviation=first_deviation))  # noqa:E501
            raise NonFiniteLossError(f"non-finite PPO loss in pass {repeat}", dump)  # noqa:E501
        if repeat == 0:
            first_deviation = deviation
        if shared:
            grad_actor = grad_critic = clip_grad_norm(actor.params.values(), config.max_grad_norm)  # noqa:E501
        else:
            grad_actor = clip_grad_norm(actor.params.values(), config.max_grad_norm)  # noqa:E501
            grad_critic = clip_grad_norm(critic.params.values(), config.max_grad_norm)  # noqa:E501
            critic_optimizer.step(critic.params)  # type: ignore[union-attr]
        actor_optimizer.step(actor.params)
        for key, value in current.items():
            totals[key] += value / config.repeats
    logger.debug("ppo: policy {:.4f} value {:.4f} clip {:.3f} kl {:.5f}", totals["policy_loss"],  # noqa:E501
                 totals["value_loss"], totals["clip_frac"], totals["approx_kl"])
    return PPOStats(grad_norm_actor=grad_actor, grad_norm_critic=grad_critic,
                    first_ratio_deviation=first_deviation, **totals)


def _accumulate(actor: PolicyNet, critic: PolicyNet, batch: RolloutBatch,
                advantages: np.ndarray, returns: np.ndarray, config: TrainConfig,  # noqa:E501
                current: Dict[str, float]) -> float:
    """Backward every worker stream into the gradients; returns max |r - 1|."""
    shared = critic is actor
    workers = batch.workers
    dtype = actor.dtype
    deviation = 0.0
    for w in range(workers):
        actor_past = prefix_cache(actor, batch, w, batch.context)
        critic_past = None if shared else prefix_cache(critic, batch, w, batch.context)  # noqa:E501
        with Tape():
            logp, entropy, beliefs = policy_terms(actor, batch, w, actor_past)
            ratio = ops.exp(ops.sub(logp, batch.log_probs[w].astype(dtype)))
            policy_loss = ops.scale(ops.mean(surrogate(ratio, advantages[w], config.clip)), -1.0)  # noqa:E501
            # the entropy bonus stays in the graph even when its weight is zero
            actor_loss = ops.sub(policy_loss, ops.scale(ops.mean(entropy), config.entropy_weight))  # noqa:E501
            if shared:
                value_loss = ops.scale(value_error(actor.value(beliefs), returns[w]), config.value_weight)  # noqa:E501
                backward(ops.scale(ops.add(actor_loss, value_loss), 1.0 / workers))  # noqa:E501
            else:
                backward(ops.scale(actor_loss, 1.0 / workers))
        if not shared:
            with Tape():
                values = critic.value(worker_beliefs(critic, batch, w, critic_past))  # noqa:E501
                value_loss = ops.scale(value_error(values, returns[w]), config.value_weight)  # noqa:E501
                backward(ops.scale(value_loss, 1.0 / workers))
        ratios = ratio.data.astype(np.float64)
        current["policy_loss"] += policy_loss.item() / workers
        current["value_loss"] += value_loss.item() / workers
        current["clip_frac"] += float(np.mean(np.abs(ratios - 1.0) > config.clip)) / workers  # noqa:E501
        current["approx_kl"] += float(np.mean((ratios - 1.0) - np.log(ratios))) / workers  # noqa:E501
        current["entropy"] += float(np.mean(entropy.data)) / workers
        deviation = max(deviation, float(np.max(np.abs(ratios - 1.0))))
    return deviation
