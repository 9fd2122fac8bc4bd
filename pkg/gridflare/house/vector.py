# coding:utf-8

from dataclasses import dataclass
from dataclasses import replace
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from loguru import logger

from gridflare.errors import ContractError
from gridflare.errors import GenerationError
from gridflare.errors import PlannerError
from gridflare.errors import UnsatisfiableInstructionError
from gridflare.house.actions import EmbodimentMask
from gridflare.house.actions import mask_for_embodiment
from gridflare.house.env import EnvConfig
from gridflare.house.env import GridHouseEnv
from gridflare.house.env import Observation
from gridflare.house.layout import House
from gridflare.house.layout import generate_house
from gridflare.house.planner import expert_rollout
from gridflare.house.tasks import Instruction
from gridflare.house.tasks import TaskKind
from gridflare.house.tasks import parse_task
from gridflare.house.tasks import sample_instruction

SeedRange = Tuple[int, int]

TRAIN_SEEDS: SeedRange = (0, 1_000_000)
EVAL_SEEDS: SeedRange = (1_000_000, 1_100_000)
MAX_RESAMPLES = 1000


def assert_disjoint(first: SeedRange, second: SeedRange) -> None:
    if first[0] < second[1] and second[0] < first[1]:
        raise ContractError(f"house seed ranges {first} and {second} overlap")


assert_disjoint(TRAIN_SEEDS, EVAL_SEEDS)


@dataclass(frozen=True)
class EpisodeSpec:
    """Everything needed to rebuild one episode bit for bit."""
    task: TaskKind
    house_seed: int
    room_count: int
    instruction_seed: int
    reset_seed: int
    expert_length: Optional[int] = None

    def build(self) -> Tuple[House, Instruction]:
        house = generate_house(self.house_seed, self.room_count)
        return house, sample_instruction(self.task, house, self.instruction_seed)  # noqa:E501

    def to_dict(self) -> Dict[str, Any]:
        return {"task": self.task.value, "house_seed": self.house_seed, "room_count": self.room_count,  # noqa:E501
                "instruction_seed": self.instruction_seed, "reset_seed": self.reset_seed,  # noqa:E501
                "expert_length": self.expert_length}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EpisodeSpec":
        return cls(task=parse_task(data["task"]), house_seed=int(data["house_seed"]),  # noqa:E501
                   room_count=int(data["room_count"]), instruction_seed=int(data["instruction_seed"]),  # noqa:E501
                   reset_seed=int(data["reset_seed"]), expert_length=data.get("expert_length"))  # noqa:E501


def room_count_for(house_seed: int, config: EnvConfig) -> int:
    low, high = config.room_counts
    return int(np.random.default_rng(house_seed).integers(low, high + 1))


def verify_spec(spec: EpisodeSpec, config: EnvConfig) -> Optional[EpisodeSpec]:  # noqa:E501
    """The episode with its expert length, or None when the house is rejected."""
    try:
        house, instruction = spec.build()
        actions = expert_rollout(house, instruction, spec.reset_seed, config)
    except (GenerationError, UnsatisfiableInstructionError, PlannerError) as error:  # noqa:E501
        logger.debug("house {} rejected for {}: {}", spec.house_seed, spec.task.value, error)  # noqa:E501
        return None
    return replace(spec, expert_length=len(actions))


def episode_specs(task, n: int, seed_range: SeedRange = EVAL_SEEDS,
                  config: Optional[EnvConfig] = None) -> List[EpisodeSpec]:
    """The first ``n`` accepted episodes walking house seeds upward."""
    task = parse_task(task)
    config = config or EnvConfig()
    specs: List[EpisodeSpec] = []
    house_seed = seed_range[0]
    while len(specs) < n:
        if house_seed >= seed_range[1]:
            raise ContractError(f"seed range {seed_range} exhausted after {len(specs)} episodes")  # noqa:E501
        spec = EpisodeSpec(task=task, house_seed=house_seed, room_count=room_count_for(house_seed, config),  # noqa:E501
                           instruction_seed=house_seed, reset_seed=house_seed)
        if (accepted := verify_spec(spec, config)) is not None:
            specs.append(accepted)
        house_seed += 1
    return specs


def sample_spec(tasks: Sequence[TaskKind], rng: np.random.Generator,
                seed_range: SeedRange, config: EnvConfig) -> EpisodeSpec:
    for _ in range(MAX_RESAMPLES):
        task = tasks[int(rng.integers(len(tasks)))]
        house_seed = int(rng.integers(*seed_range))
        spec = EpisodeSpec(task=task, house_seed=house_seed, room_count=room_count_for(house_seed, config),  # noqa:E501
                           instruction_seed=int(rng.integers(2**31)), reset_seed=int(rng.integers(2**31)))  # noqa:E501
        if (accepted := verify_spec(spec, config)) is not None:
            return accepted
    raise GenerationError(f"no usable house after {MAX_RESAMPLES} draws")


class VectorEnv():
    """Independent environments stepped together.

    Worker ``i`` draws its episodes from its own stream seeded with
    ``(seed, i)``, so the trajectories do not depend on how many workers run
    beside it.
    """

    def __init__(self, tasks: Sequence, workers: int, seed: int,
                 config: Optional[EnvConfig] = None, seed_range: SeedRange = TRAIN_SEEDS):  # noqa:E501
        if workers < 1:
            raise ContractError(f"workers must be positive, got {workers}")
        self.__tasks: Tuple[TaskKind, ...] = tuple(parse_task(task) for task in tasks)  # noqa:E501
        if not self.__tasks:
            raise ContractError("at least one task is required")
        self.__config: EnvConfig = config or EnvConfig()
        self.__seed_range: SeedRange = seed_range
        self.__rngs: List[np.random.Generator] = [np.random.default_rng([seed, index]) for index in range(workers)]  # noqa:E501
        self.__envs: List[GridHouseEnv] = [GridHouseEnv(self.__config) for _ in range(workers)]  # noqa:E501
        self.__specs: List[Optional[EpisodeSpec]] = [None] * workers
        self.__observations: List[Optional[Observation]] = [None] * workers
        self.__steps: np.ndarray = np.zeros(workers, dtype=np.int64)
        self.__done: np.ndarray = np.ones(workers, dtype=bool)

    @property
    def workers(self) -> int:
        return len(self.__envs)

    @property
    def config(self) -> EnvConfig:
        return self.__config

    @property
    def mask(self) -> EmbodimentMask:
        return mask_for_embodiment(self.__config.embodiment)

    @property
    def observations(self) -> List[Observation]:
        if any(obs is None for obs in self.__observations):
            raise ContractError("vector environment used before reset")
        return list(self.__observations)  # type: ignore[arg-type]

    @property
    def episode_steps(self) -> np.ndarray:
        """Episode step index of each worker's current observation."""
        return self.__steps.copy()

    @property
    def specs(self) -> List[Optional[EpisodeSpec]]:
        return list(self.__specs)

    def _reset_worker(self, index: int) -> None:
        spec = sample_spec(self.__tasks, self.__rngs[index], self.__seed_range, self.__config)  # noqa:E501
        house, instruction = spec.build()
        self.__specs[index] = spec
        self.__observations[index] = self.__envs[index].reset(house, instruction, spec.reset_seed)  # noqa:E501
        self.__steps[index] = 0
        self.__done[index] = False

    def reset_all(self) -> List[Observation]:
        for index in range(self.workers):
            self._reset_worker(index)
        return self.observations

    def reset_done(self) -> List[int]:
        """Start a new episode on every finished worker; returns their indices."""  # noqa:E501
        indices = [int(index) for index in np.flatnonzero(self.__done)]
        for index in indices:
            self._reset_worker(index)
        return indices

    def step_all(self, actions: Sequence[int]) -> Tuple[List[Observation], np.ndarray, np.ndarray, List[Dict[str, Any]]]:  # noqa:E501
        if len(actions) != self.workers:
            raise ContractError(f"expected {self.workers} actions, got {len(actions)}")  # noqa:E501
        if self.__done.any():
            raise ContractError("finished workers must be reset before stepping")  # noqa:E501
        rewards = np.zeros(self.workers, dtype=np.float64)
        dones = np.zeros(self.workers, dtype=bool)
        infos: List[Dict[str, Any]] = []
        for index, (env, action) in enumerate(zip(self.__envs, actions)):
            obs, reward, done, info = env.step(int(action))
            self.__observations[index] = obs
            self.__steps[index] += 1
            rewards[index], dones[index] = reward, done
            if done:
                spec = self.__specs[index]
                info = dict(info, task=spec.task.value, expert_length=spec.expert_length)  # type: ignore[union-attr]  # noqa:E501
            infos.append(info)
        self.__done = dones.copy()
        return self.observations, rewards, dones, infos
