# coding:utf-8

from collections import OrderedDict
from dataclasses import dataclass
import math
import os
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

from loguru import logger

from gridflare.config import write_json
from gridflare.errors import ConfigError
from gridflare.evaluate.report import EvalReport
from gridflare.evaluate.report import evaluate_agent
from gridflare.grad import AdamState
from gridflare.grad import Tensor
from gridflare.house.vector import EVAL_SEEDS
from gridflare.house.vector import TRAIN_SEEDS
from gridflare.house.vector import EpisodeSpec
from gridflare.house.vector import VectorEnv
from gridflare.house.vector import assert_disjoint
from gridflare.house.vector import episode_specs
from gridflare.policy.agents import PolicyAgent
from gridflare.policy.config import PolicyConfig
from gridflare.policy.network import PolicyNet
from gridflare.policy.network import init_finetune
from gridflare.rl.config import TrainConfig
from gridflare.rl.gae import compute_gae
from gridflare.rl.gae import normalize_advantages
from gridflare.rl.ppo import ppo_update
from gridflare.rl.rollout import RolloutBatch
from gridflare.rl.rollout import RolloutCollector
from gridflare.rl.sac import ReplayBuffer
from gridflare.rl.sac import q_network
from gridflare.rl.sac import sac_update
from gridflare.tables import append_row

CURVE_COLUMNS = ("env_steps", "update_idx", "mean_sparse_return", "eval_sr", "eval_sel",  # noqa:E501
                 "mean_ep_len", "mean_collisions", "policy_loss", "value_loss", "clip_frac",  # noqa:E501
                 "approx_kl", "grad_norm_actor", "grad_norm_critic")

NAN = float("nan")


@dataclass(frozen=True)
class FinetuneResult:
    run_dir: str
    best_checkpoint: str
    last_checkpoint: str
    curves: str
    final_report: EvalReport
    best_sr: float
    updates: int
    env_steps: int


def _source(pretrained) -> Optional[PolicyNet]:
    if pretrained is None or isinstance(pretrained, PolicyNet):
        return pretrained
    return PolicyNet.load(pretrained)


def build_networks(pretrained, config: TrainConfig,
                   policy_config: Optional[PolicyConfig] = None) -> Tuple[PolicyNet, PolicyNet]:  # noqa:E501
    """Actor and critic for a run; they are the same object with ``shared_ac``.

    Fine-tuning copies the pretrained trunk into both networks. From scratch
    the two get independent random draws.
    """
    source = _source(pretrained)
    if config.init == "finetune":
        if source is None:
            raise ConfigError("fine-tuning needs a pretrained checkpoint")
        actor, critic = init_finetune(source, config.seed)
    else:
        base = policy_config or (source.config if source is not None else PolicyConfig())  # noqa:E501
        actor = PolicyNet(base.replace(seed=config.seed))
        critic = PolicyNet(base.replace(seed=config.seed + 1))
    if not config.shared_ac:
        return actor, critic
    # one trunk, two heads: the fresh value head moves onto the actor
    for name in ("head.critic.weight", "head.critic.bias"):
        actor.params[name].assign(critic.params[name].data)
    return actor, actor


def trainable_parameters(actor: PolicyNet, critic: Optional[PolicyNet]) -> Dict[str, Tensor]:  # noqa:E501
    """Every distinct parameter tensor the run optimizes."""
    params: Dict[str, Tensor] = OrderedDict((f"actor.{name}", param) for name, param in actor.params.items())  # noqa:E501
    if critic is not None and critic is not actor:
        params.update((f"critic.{name}", param) for name, param in critic.params.items())  # noqa:E501
    return params


class _SoftActorCritic():
    """Twin Q networks, their targets and the replay buffer of one run."""

    def __init__(self, actor: PolicyNet, config: TrainConfig):
        self.__config: TrainConfig = config
        self.__q1: PolicyNet = q_network(actor, config.seed)
        self.__q2: PolicyNet = q_network(actor, config.seed + 1)
        self.__q1_target: PolicyNet = self.__q1.copy()
        self.__q2_target: PolicyNet = self.__q2.copy()
        self.__buffer: ReplayBuffer = ReplayBuffer(config.buffer_capacity, config.seed)  # noqa:E501
        self.__optimizers: Dict[str, AdamState] = {name: AdamState(config.learning_rate) for name in ("actor", "q1", "q2")}  # noqa:E501

    def update(self, actor: PolicyNet, batch: RolloutBatch) -> Dict[str, float]:  # noqa:E501
        cfg = self.__config
        self.__buffer.add_batch(batch)
        if len(self.__buffer) < cfg.sac_batch:
            logger.debug("sac: buffer holds {} of {} transitions, no update", len(self.__buffer), cfg.sac_batch)  # noqa:E501
            return {}
        stats = None
        for _ in range(cfg.sac_updates):
            stats = sac_update(actor, self.__q1, self.__q2, self.__q1_target, self.__q2_target,  # noqa:E501
                               self.__buffer, cfg, self.__optimizers, batch.valid)  # noqa:E501
        assert stats is not None
        return {"policy_loss": stats.actor_loss, "value_loss": stats.critic_loss,  # noqa:E501
                "grad_norm_actor": stats.grad_norm_actor, "grad_norm_critic": stats.grad_norm_critic}  # noqa:E501


def _ppo_phase(actor: PolicyNet, critic: PolicyNet, batch: RolloutBatch, config: TrainConfig,  # noqa:E501
               optimizers: Tuple[AdamState, Optional[AdamState]], run_dir: str) -> Dict[str, float]:  # noqa:E501
    advantages, returns = compute_gae(batch.rewards, batch.values, batch.bootstrap, batch.dones,  # noqa:E501
                                      config.gamma, config.gae_lambda, batch.truncated, batch.next_values)  # noqa:E501
    advantages = normalize_advantages(advantages, enabled=config.normalize_advantages)  # noqa:E501
    stats = ppo_update(actor, critic, batch, advantages, returns, config, optimizers[0], optimizers[1], dump_dir=run_dir)  # noqa:E501
    return stats.to_dict()


def finetune(pretrained, task: Optional[str] = None, config: Optional[TrainConfig] = None,  # noqa:E501
             out_dir: str = ".", policy_config: Optional[PolicyConfig] = None) -> FinetuneResult:  # noqa:E501
    """Sparse-reward RL on one task, starting from a behavior-cloned policy.

    Every update collects ``workers x rollout_steps`` transitions and then
    trains on them. Greedy evaluation on the fixed unseen-house episodes runs
    before the first update, every ``eval_every`` updates and after the last
    one; ``curves.csv`` gets one row per update.
    """
    config = config or TrainConfig()
    if task is not None:
        config = config.replace(task=task)
    assert_disjoint(TRAIN_SEEDS, EVAL_SEEDS)
    os.makedirs(out_dir, exist_ok=True)
    write_json(os.path.join(out_dir, "config.json"), config.to_dict())
    curves = os.path.join(out_dir, "curves.csv")
    if os.path.isfile(curves):
        os.remove(curves)
    best_path = os.path.join(out_dir, "ckpt_best.flrb")
    last_path = os.path.join(out_dir, "ckpt_last.flrb")

    actor, critic = build_networks(pretrained, config, policy_config)
    env_config = config.env_config()
    env = VectorEnv([config.task], config.workers, config.seed, env_config, TRAIN_SEEDS)  # noqa:E501
    collector = RolloutCollector(env, config)
    eval_specs: List[EpisodeSpec] = episode_specs(config.task, config.eval_episodes, EVAL_SEEDS, env_config)  # noqa:E501
    sac: Optional[_SoftActorCritic] = None
    optimizers: Tuple[AdamState, Optional[AdamState]] = (AdamState(config.learning_rate), None)  # noqa:E501
    if config.algo == "sac":
        sac = _SoftActorCritic(actor, config)
    elif critic is not actor:
        optimizers = (optimizers[0], AdamState(config.learning_rate))

    per_update = config.workers * config.rollout_steps
    updates = math.ceil(config.total_steps / per_update)
    logger.info("{} {} on {}: {} updates of {} steps, lr {:g}, variant {}", config.algo, config.init,  # noqa:E501
                config.task, updates, per_update, config.learning_rate, ",".join(config.variant()))  # noqa:E501

    def evaluation(update: int) -> EvalReport:
        return evaluate_agent(PolicyAgent(actor, env_config, mode="argmax"), eval_specs, config.task, EVAL_SEEDS, f"update {update}")  # noqa:E501

    report = evaluation(0)
    best_sr = report.success_rate
    actor.save(best_path, {"phase": "rl", "update": 0, "env_steps": 0, "eval_sr": best_sr})  # noqa:E501
    append_row(curves, CURVE_COLUMNS, dict.fromkeys(CURVE_COLUMNS, NAN) | {  # noqa:E501
        "env_steps": 0, "update_idx": 0, "eval_sr": report.success_rate, "eval_sel": report.sel})  # noqa:E501
    env_steps = 0
    for update in range(1, updates + 1):
        # collection and update alternate; nothing mutates the networks mid-phase
        batch = collector.collect(actor, None if sac is not None else critic)
        env_steps += batch.size
        if sac is not None:
            stats = sac.update(actor, batch)
        else:
            stats = _ppo_phase(actor, critic, batch, config, optimizers, out_dir)  # noqa:E501
        row: Dict[str, Any] = dict.fromkeys(CURVE_COLUMNS, NAN)
        row.update({key: value for key, value in stats.items() if key in CURVE_COLUMNS})  # noqa:E501
        row.update(batch.episode_stats())
        row.update({"env_steps": env_steps, "update_idx": update})
        if update % config.eval_every == 0 or update == updates:
            report = evaluation(update)
            row.update({"eval_sr": report.success_rate, "eval_sel": report.sel})  # noqa:E501
            if report.success_rate > best_sr:
                best_sr = report.success_rate
                actor.save(best_path, {"phase": "rl", "update": update, "env_steps": env_steps, "eval_sr": best_sr})  # noqa:E501
        append_row(curves, CURVE_COLUMNS, row)
        logger.info("update {}/{} steps {}: return {:.3f} eval SR {:.3f} policy {:.4f} value {:.4f}",  # noqa:E501
                    update, updates, env_steps, row["mean_sparse_return"], row["eval_sr"],  # noqa:E501
                    row["policy_loss"], row["value_loss"])
    actor.save(last_path, {"phase": "rl", "update": updates, "env_steps": env_steps, "eval_sr": report.success_rate})  # noqa:E501
    report.write(out_dir, "final_eval")
    return FinetuneResult(run_dir=out_dir, best_checkpoint=best_path, last_checkpoint=last_path,  # noqa:E501
                          curves=curves, final_report=report, best_sr=best_sr,
                          updates=updates, env_steps=env_steps)

