# coding:utf-8

from dataclasses import dataclass
import math
import os
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

from loguru import logger
import numpy as np

from gridflare.config import write_json
from gridflare.errors import ConfigError
from gridflare.errors import ContractError
from gridflare.errors import NonFiniteLossError
from gridflare.evaluate.report import evaluate_agent
from gridflare.grad import AdamState
from gridflare.grad import Tape
from gridflare.grad import Tensor
from gridflare.grad import backward
from gridflare.grad import clip_grad_norm
from gridflare.grad import ops
from gridflare.house.vector import EpisodeSpec
from gridflare.house.vector import SeedRange
from gridflare.house.vector import episode_specs
from gridflare.imitation.config import BCConfig
from gridflare.imitation.demos import HELDOUT_SEEDS
from gridflare.imitation.demos import DemoDataset
from gridflare.imitation.demos import DemoEpisode
from gridflare.policy.agents import PolicyAgent
from gridflare.policy.config import PolicyConfig
from gridflare.policy.network import PolicyNet
from gridflare.tables import append_row

LOG_COLUMNS = ("step", "loss", "eval_task", "eval_sr", "eval_sel")


@dataclass(frozen=True)
class Chunk:
    """A contiguous slice of one episode, decoded as one sequence."""
    tokens: np.ndarray
    prev_actions: np.ndarray
    actions: np.ndarray
    steps: np.ndarray

    def __len__(self) -> int:
        return int(self.actions.shape[0])


@dataclass(frozen=True)
class BCResult:
    best_checkpoint: str
    last_checkpoint: str
    log: str
    best_sr: float
    steps: int


def chunk_episode(episode: DemoEpisode, length: int, start_action: int) -> List[Chunk]:  # noqa:E501
    """Split an episode into chunks that keep their true step positions."""
    actions = np.asarray(episode.record.actions, dtype=np.int64)
    previous = np.concatenate([[start_action], actions[:-1]]).astype(np.int64)
    steps = np.arange(actions.shape[0], dtype=np.int64)
    tokens = np.asarray(episode.tokens, dtype=np.int64)
    return [Chunk(tokens=tokens[start:start + length], prev_actions=previous[start:start + length],  # noqa:E501
                  actions=actions[start:start + length], steps=steps[start:start + length])  # noqa:E501
            for start in range(0, actions.shape[0], length)]


def chunk_logits(net: PolicyNet, chunk: Chunk) -> Tensor:
    states = net.encode_state(chunk.tokens)
    beliefs = net.full_forward(states, chunk.prev_actions, chunk.steps, np.zeros(len(chunk), dtype=np.int64))  # noqa:E501
    return net.actor_logits(beliefs)


def bc_update(net: PolicyNet, optimizer: AdamState, chunks: Sequence[Chunk],
              max_grad_norm: float = 1.0) -> float:
    """One Adam step on the mean token cross-entropy of ``chunks``.

    Gradients accumulate chunk by chunk, each weighted by its share of the
    batch tokens, so the step equals one over the concatenated batch.
    """
    if not chunks:
        raise ContractError("bc_update needs at least one chunk")
    total = sum(len(chunk) for chunk in chunks)
    net.zero_grad()
    loss = 0.0
    for chunk in chunks:
        weight = len(chunk) / total
        with Tape():
            part = ops.cross_entropy(chunk_logits(net, chunk), chunk.actions)
            backward(ops.scale(part, weight))
        loss += part.item() * weight
    if not math.isfinite(loss):
        raise NonFiniteLossError(f"behavior cloning loss is {loss}")
    clip_grad_norm(net.params.values(), max_grad_norm)
    optimizer.step(net.params)
    return loss


def eval_specs(dataset: DemoDataset, held: Sequence[int], task: str, count: int) -> Tuple[List[EpisodeSpec], SeedRange]:  # noqa:E501
    """Held-out episodes of ``task`` and the seed range their houses come from.

    Without a held-out episode of the task, fresh houses are drawn from the
    seeds no demonstration uses.
    """
    specs = [dataset[index].record.spec for index in held if dataset[index].task.value == task]  # noqa:E501
    if specs:
        return specs[:count], dataset.seed_range
    return episode_specs(task, count, HELDOUT_SEEDS), HELDOUT_SEEDS


def train_bc(dataset: DemoDataset, config: Optional[BCConfig] = None,
             policy_config: Optional[PolicyConfig] = None, out_dir: str = ".") -> BCResult:  # noqa:E501
    """Multi-task behavior cloning with periodic greedy evaluation.

    A seeded share of the episodes is held out; their houses are where the
    greedy rollouts run. The checkpoint with the best mean success rate is
    kept next to the last one.
    """
    config = config or BCConfig()
    policy_config = policy_config or PolicyConfig()
    if config.chunk > policy_config.context_limit:
        raise ConfigError(f"chunk {config.chunk} exceeds the context limit {policy_config.context_limit}")  # noqa:E501
    if not len(dataset):
        raise ConfigError("demonstration dataset is empty")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng([config.seed, 1])
    order = rng.permutation(len(dataset))
    held_count = min(int(round(len(dataset) * config.eval_fraction)), len(dataset) - 1)  # noqa:E501
    held = sorted(int(index) for index in order[:held_count])
    train = sorted(int(index) for index in order[held_count:])
    net = PolicyNet(policy_config)
    chunks = [chunk for index in train for chunk in chunk_episode(dataset[index], config.chunk, net.start_action)]  # noqa:E501
    evaluations: Dict[str, Tuple[List[EpisodeSpec], SeedRange]] = {
        task: eval_specs(dataset, held, task, config.eval_episodes) for task in config.eval_tasks}  # noqa:E501
    write_json(os.path.join(out_dir, "config.json"), {"bc": config.to_dict(), "policy": policy_config.to_dict(),  # noqa:E501
                                                      "dataset": dataset.manifest()})  # noqa:E501
    log_path = os.path.join(out_dir, "bc_log.csv")
    if os.path.isfile(log_path):
        os.remove(log_path)
    best_path = os.path.join(out_dir, "ckpt_best.flrb")
    last_path = os.path.join(out_dir, "ckpt_last.flrb")
    optimizer = AdamState(config.lr)
    per_epoch = math.ceil(len(chunks) / config.batch_size)
    total_steps = config.epochs * per_epoch
    logger.info("behavior cloning on {} episodes ({} chunks), {} held out, {} steps",  # noqa:E501
                len(train), len(chunks), len(held), total_steps)
    best_sr = -1.0
    step = 0
    for epoch in range(config.epochs):
        permutation = rng.permutation(len(chunks))
        for start in range(0, len(chunks), config.batch_size):
            batch = [chunks[index] for index in permutation[start:start + config.batch_size]]  # noqa:E501
            loss = bc_update(net, optimizer, batch, config.max_grad_norm)
            step += 1
            if step % config.eval_every and step != total_steps:
                continue
            rates = []
            for task, (specs, seed_range) in evaluations.items():
                report = evaluate_agent(PolicyAgent(net, mode="argmax"), specs, task, seed_range)  # noqa:E501
                rates.append(report.success_rate)
                append_row(log_path, LOG_COLUMNS, {"step": step, "loss": loss, "eval_task": task,  # noqa:E501
                                                   "eval_sr": report.success_rate, "eval_sel": report.sel})  # noqa:E501
            mean_sr = float(np.mean(rates))
            logger.info("bc epoch {} step {}/{}: loss {:.4f} eval SR {:.3f}", epoch, step, total_steps, loss, mean_sr)  # noqa:E501
            if mean_sr > best_sr:
                best_sr = mean_sr
                net.save(best_path, {"phase": "bc", "step": step, "eval_sr": mean_sr})  # noqa:E501
    net.save(last_path, {"phase": "bc", "step": step})
    return BCResult(best_checkpoint=best_path, last_checkpoint=last_path, log=log_path,  # noqa:E501
                    best_sr=best_sr, steps=step)
