# coding:utf-8

from dataclasses import dataclass
import hashlib
import os
from typing import Any
from typing import Dict
from typing import Iterable
from typing import Optional
from typing import Tuple

from loguru import logger
import numpy as np
import pandas as pd

from gridflare.config import write_json
from gridflare.errors import ContractError
from gridflare.house.env import EnvConfig
from gridflare.house.env import GridHouseEnv
from gridflare.house.vector import EVAL_SEEDS
from gridflare.house.vector import TRAIN_SEEDS
from gridflare.house.vector import EpisodeSpec
from gridflare.house.vector import SeedRange
from gridflare.house.vector import assert_disjoint
from gridflare.house.vector import episode_specs
from gridflare.policy.agents import Agent
from gridflare.policy.agents import PolicyAgent
from gridflare.policy.network import PolicyNet
from gridflare.tables import write_table

EVAL_EPISODES = 200
EPISODE_COLUMNS = ("house_seed", "instruction", "success", "length", "expert_length", "collisions", "sel")  # noqa:E501


def sel(success: bool, length: int, expert_length: int) -> float:
    """Success weighted by expert length over episode length, capped at 1."""
    if length < 1 or expert_length < 1:
        raise ContractError(f"episode lengths must be positive, got {length} and {expert_length}")  # noqa:E501
    if not success:
        return 0.0
    return expert_length / max(length, expert_length)


@dataclass(frozen=True)
class EpisodeResult:
    spec: EpisodeSpec
    instruction: str
    success: bool
    length: int
    collisions: int

    @property
    def expert_length(self) -> int:
        return int(self.spec.expert_length or self.length)

    @property
    def sel(self) -> float:
        return sel(self.success, self.length, self.expert_length)

    def to_dict(self) -> Dict[str, Any]:
        return {"house_seed": self.spec.house_seed, "instruction": self.instruction,  # noqa:E501
                "success": self.success, "length": self.length, "expert_length": self.expert_length,  # noqa:E501
                "collisions": self.collisions, "sel": self.sel}


@dataclass(frozen=True)
class EvalReport:
    task: str
    episodes: Tuple[EpisodeResult, ...]
    seed_range: SeedRange = EVAL_SEEDS
    checkpoint: str = ""

    @property
    def count(self) -> int:
        return len(self.episodes)

    def _mean(self, values: Iterable[float]) -> float:
        values = list(values)
        return float(np.mean(values)) if values else 0.0

    @property
    def success_rate(self) -> float:
        return self._mean(float(item.success) for item in self.episodes)

    @property
    def sel(self) -> float:
        return self._mean(item.sel for item in self.episodes)

    @property
    def mean_length(self) -> float:
        return self._mean(item.length for item in self.episodes)

    @property
    def mean_collisions(self) -> float:
        return self._mean(item.collisions for item in self.episodes)

    def summary(self) -> Dict[str, Any]:
        return {"task": self.task, "episodes": self.count, "success_rate": self.success_rate,  # noqa:E501
                "sel": self.sel, "mean_length": self.mean_length, "mean_collisions": self.mean_collisions,  # noqa:E501
                "seed_range": list(self.seed_range), "checkpoint": self.checkpoint}  # noqa:E501

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([item.to_dict() for item in self.episodes], columns=list(EPISODE_COLUMNS))  # noqa:E501

    def write(self, out_dir: str, name: str = "eval") -> Tuple[str, str]:
        json_path = os.path.join(out_dir, f"{name}.json")
        csv_path = os.path.join(out_dir, f"{name}.csv")
        write_json(json_path, dict(self.summary(), records=[item.to_dict() for item in self.episodes]))  # noqa:E501
        write_table(csv_path, self.frame())
        return json_path, csv_path


def run_episode(agent: Agent, spec: EpisodeSpec, config: Optional[EnvConfig] = None) -> EpisodeResult:  # noqa:E501
    config = config or agent.config
    house, instruction = spec.build()
    env = GridHouseEnv(config)
    obs = env.reset(house, instruction, spec.reset_seed)
    agent.reset(house, instruction, spec.reset_seed)
    previous: Optional[int] = None
    info: Dict[str, Any] = {}
    done = False
    t = 0
    while not done:
        action = agent.act(obs, t, previous)
        obs, _, done, info = env.step(action)
        previous = action
        t += 1
    return EpisodeResult(spec=spec, instruction=instruction.text, success=bool(info["success"]),  # noqa:E501
                         length=int(info["steps"]), collisions=int(info["collisions"]))  # noqa:E501


def evaluate_agent(agent: Agent, specs: Iterable[EpisodeSpec], task: str,
                   seed_range: SeedRange = EVAL_SEEDS, checkpoint: str = "") -> EvalReport:  # noqa:E501
    episodes = tuple(run_episode(agent, spec) for spec in specs)
    report = EvalReport(task=task, episodes=episodes, seed_range=seed_range, checkpoint=checkpoint)  # noqa:E501
    logger.debug("{} on {}: SR {:.3f} SEL {:.3f} over {} episodes", agent.name, task,  # noqa:E501
                 report.success_rate, report.sel, report.count)
    return report


def checkpoint_id(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as rhdl:
        for chunk in iter(lambda: rhdl.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


def evaluate(checkpoint, task, n_episodes: int = EVAL_EPISODES,
             seed_range: SeedRange = EVAL_SEEDS, greedy: bool = True,
             config: Optional[EnvConfig] = None, seed: int = 0) -> EvalReport:
    """Roll a checkpoint out on unseen houses.

    ``checkpoint`` is a path or an in-memory network. Loading a checkpoint
    that does not fit its config raises CheckpointError.
    """
    assert_disjoint(seed_range, TRAIN_SEEDS)
    config = config or EnvConfig()
    if isinstance(checkpoint, PolicyNet):
        net, ident = checkpoint, ""
    else:
        net, ident = PolicyNet.load(checkpoint), checkpoint_id(checkpoint)
    specs = episode_specs(task, n_episodes, seed_range, config)
    agent = PolicyAgent(net, config, mode="argmax" if greedy else "sample", seed=seed)  # noqa:E501
    report = evaluate_agent(agent, specs, specs[0].task.value if specs else str(task), seed_range, ident)  # noqa:E501
    logger.info("eval {}: SR {:.3f} SEL {:.3f} length {:.1f} collisions {:.2f}",  # noqa:E501
                report.task, report.success_rate, report.sel, report.mean_length, report.mean_collisions)  # noqa:E501
    return report
