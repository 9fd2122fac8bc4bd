# coding:utf-8

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import os
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

from loguru import logger
import numpy as np

from gridflare.config import read_json
from gridflare.config import write_json
from gridflare.errors import ConfigError
from gridflare.errors import DemoYieldError
from gridflare.errors import GenerationError
from gridflare.errors import PlannerError
from gridflare.errors import UnsatisfiableInstructionError
from gridflare.house.env import EnvConfig
from gridflare.house.env import GridHouseEnv
from gridflare.house.planner import expert_rollout
from gridflare.house.records import EpisodeRecord
from gridflare.house.records import read_records
from gridflare.house.records import write_records
from gridflare.house.tasks import BASE_TASKS
from gridflare.house.tasks import TaskKind
from gridflare.house.tasks import parse_task
from gridflare.house.tokens import OBSERVATION_TOKENS
from gridflare.house.tokens import vocabulary_hash
from gridflare.house.vector import TRAIN_SEEDS
from gridflare.house.vector import EpisodeSpec
from gridflare.house.vector import SeedRange
from gridflare.house.vector import room_count_for

# demonstrations use the lower part of the training range; the rest is kept
# for held-out checks during pretraining
DEMO_SEEDS: SeedRange = (TRAIN_SEEDS[0], 900_000)
HELDOUT_SEEDS: SeedRange = (900_000, TRAIN_SEEDS[1])
MIN_YIELD = 0.9
MAX_DRAWS_PER_EPISODE = 50

MANIFEST = "dataset.json"
EPISODES = "demos.jsonl"
OBSERVATIONS = "observations.npy"


@dataclass(frozen=True)
class DemoEpisode:
    record: EpisodeRecord
    tokens: np.ndarray

    @property
    def task(self) -> TaskKind:
        return self.record.spec.task

    @property
    def length(self) -> int:
        return self.record.length


def replay_tokens(record: EpisodeRecord, config: Optional[EnvConfig] = None) -> Tuple[np.ndarray, bool]:  # noqa:E501
    """Observation tokens seen before every stored action, and the outcome."""
    house, instruction = record.spec.build()
    env = GridHouseEnv(config or EnvConfig())
    obs = env.reset(house, instruction, record.spec.reset_seed)
    rows: List[np.ndarray] = []
    info: Dict[str, Any] = {"success": False}
    for action in record.actions:
        rows.append(obs.tokens())
        obs, _, done, info = env.step(action)
        if done:
            break
    tokens = np.stack(rows).astype(np.int16) if rows else np.zeros((0, OBSERVATION_TOKENS), dtype=np.int16)  # noqa:E501
    return tokens, bool(info["success"]) and len(rows) == len(record.actions)  # noqa:E501


def demonstrate(spec: EpisodeSpec, config: Optional[EnvConfig] = None) -> Tuple[str, Optional[DemoEpisode]]:  # noqa:E501
    """One expert episode: ("ok", episode), ("skip", None) or ("fail", None).

    A house without a valid target is skipped; a planner failure counts
    against the yield.
    """
    config = config or EnvConfig()
    try:
        house, instruction = spec.build()
        actions = expert_rollout(house, instruction, spec.reset_seed, config)
    except (GenerationError, UnsatisfiableInstructionError) as error:
        logger.debug("skip house {}: {}", spec.house_seed, error)
        return "skip", None
    except PlannerError as error:
        logger.warning("planner failed on house {}: {}", spec.house_seed, error)  # noqa:E501
        return "fail", None
    spec = EpisodeSpec(task=spec.task, house_seed=spec.house_seed, room_count=spec.room_count,  # noqa:E501
                       instruction_seed=spec.instruction_seed, reset_seed=spec.reset_seed,  # noqa:E501
                       expert_length=len(actions))
    rewards = [0.0] * (len(actions) - 1) + [1.0]
    record = EpisodeRecord(spec=spec, instruction=instruction, actions=tuple(actions),  # noqa:E501
                           rewards=tuple(rewards), success=True)
    tokens, success = replay_tokens(record, config)
    if not success:
        logger.warning("expert replay failed on house {}", spec.house_seed)
        return "fail", None
    return "ok", DemoEpisode(record=record, tokens=tokens)


def _demonstrate(spec: EpisodeSpec) -> Tuple[str, Optional[DemoEpisode]]:
    return demonstrate(spec)


class DemoDataset():
    """Expert episodes of the base tasks with their observation tokens."""

    def __init__(self, episodes: Sequence[DemoEpisode], seed: int = 0,
                 failures: int = 0, seed_range: SeedRange = DEMO_SEEDS):
        self.__episodes: Tuple[DemoEpisode, ...] = tuple(episodes)
        self.__seed: int = seed
        self.__failures: int = failures
        self.__seed_range: SeedRange = seed_range
        if leaked := sorted({item.task.value for item in self.__episodes if item.task not in BASE_TASKS}):  # noqa:E501
            raise ConfigError(f"demonstrations are limited to base tasks, found {', '.join(leaked)}")  # noqa:E501

    def __len__(self) -> int:
        return len(self.__episodes)

    def __iter__(self):
        return iter(self.__episodes)

    def __getitem__(self, index: int) -> DemoEpisode:
        return self.__episodes[index]

    @property
    def episodes(self) -> Tuple[DemoEpisode, ...]:
        return self.__episodes

    @property
    def seed_range(self) -> SeedRange:
        return self.__seed_range

    @property
    def failures(self) -> int:
        return self.__failures

    @property
    def steps(self) -> int:
        return int(sum(item.length for item in self.__episodes))

    @property
    def yield_rate(self) -> float:
        total = len(self.__episodes) + self.__failures
        return len(self.__episodes) / total if total else 1.0

    def counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for item in self.__episodes:
            counts[item.task.value] = counts.get(item.task.value, 0) + 1
        return counts

    def manifest(self) -> Dict[str, Any]:
        return {"episodes": len(self.__episodes), "counts": self.counts(), "steps": self.steps,  # noqa:E501
                "failures": self.__failures, "yield": self.yield_rate, "seed": self.__seed,  # noqa:E501
                "seed_range": list(self.__seed_range), "vocabulary_hash": vocabulary_hash()}  # noqa:E501

    def save(self, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        write_records(os.path.join(out_dir, EPISODES), (item.record for item in self.__episodes))  # noqa:E501
        tokens = [item.tokens for item in self.__episodes]
        stacked = np.concatenate(tokens) if tokens else np.zeros((0, OBSERVATION_TOKENS), dtype=np.int16)  # noqa:E501
        np.save(os.path.join(out_dir, OBSERVATIONS), stacked.astype(np.int16), allow_pickle=False)  # noqa:E501
        path = os.path.join(out_dir, MANIFEST)
        write_json(path, self.manifest())
        return path

    @classmethod
    def load(cls, directory: str) -> "DemoDataset":
        manifest_path = os.path.join(directory, MANIFEST)
        if not os.path.isfile(manifest_path):
            raise ConfigError(f"no demonstration dataset in {directory}")
        manifest = read_json(manifest_path)
        if manifest.get("vocabulary_hash") != vocabulary_hash():
            raise ConfigError(f"dataset {directory} was written for another token vocabulary")  # noqa:E501
        records = read_records(os.path.join(directory, EPISODES))
        stacked = np.load(os.path.join(directory, OBSERVATIONS), allow_pickle=False)  # noqa:E501
        lengths = [record.length for record in records]
        if sum(lengths) != stacked.shape[0]:
            raise ConfigError(f"dataset {directory}: {stacked.shape[0]} observations for {sum(lengths)} actions")  # noqa:E501
        bounds = np.cumsum([0] + lengths)
        episodes = [DemoEpisode(record=record, tokens=stacked[bounds[i]:bounds[i + 1]])  # noqa:E501
                    for i, record in enumerate(records)]
        return cls(episodes, seed=int(manifest.get("seed", 0)), failures=int(manifest.get("failures", 0)),  # noqa:E501
                   seed_range=tuple(manifest.get("seed_range", DEMO_SEEDS)))  # type: ignore[arg-type]  # noqa:E501


def _draw(task: TaskKind, rng: np.random.Generator, config: EnvConfig) -> EpisodeSpec:  # noqa:E501
    house_seed = int(rng.integers(*DEMO_SEEDS))
    return EpisodeSpec(task=task, house_seed=house_seed, room_count=room_count_for(house_seed, config),  # noqa:E501
                       instruction_seed=int(rng.integers(2**31)), reset_seed=int(rng.integers(2**31)))  # noqa:E501


def generate_demos(tasks: Sequence = BASE_TASKS, episodes_per_task: int = 10,
                   seed: int = 0, workers: int = 1) -> DemoDataset:
    """Planner demonstrations on training houses.

    Each task draws its houses from its own stream, so the dataset for one
    task does not change when other tasks join the mix. The process pool
    keeps the candidate order and gives the same dataset as one worker.
    """
    if episodes_per_task < 1:
        raise ConfigError(f"episodes per task must be positive, got {episodes_per_task}")  # noqa:E501
    kinds = [parse_task(task) for task in tasks]
    if novel := [kind.value for kind in kinds if kind not in BASE_TASKS]:
        raise ConfigError(f"no demonstrations for novel tasks: {', '.join(novel)}")  # noqa:E501
    config = EnvConfig()
    episodes: List[DemoEpisode] = []
    failures = 0
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for kind in kinds:
            rng = np.random.default_rng([seed, BASE_TASKS.index(kind)])
            accepted: List[DemoEpisode] = []
            draws = 0
            while len(accepted) < episodes_per_task:
                if draws >= MAX_DRAWS_PER_EPISODE * episodes_per_task:
                    raise GenerationError(f"only {len(accepted)} {kind.value} demonstrations after {draws} houses")  # noqa:E501
                candidates = [_draw(kind, rng, config) for _ in range(episodes_per_task - len(accepted))]  # noqa:E501
                draws += len(candidates)
                results = pool.map(_demonstrate, candidates) if pool else map(_demonstrate, candidates)  # noqa:E501
                for status, episode in results:
                    if status == "fail":
                        failures += 1
                    elif episode is not None:
                        accepted.append(episode)
            episodes.extend(accepted)
            logger.info("{} demonstrations of {}, mean length {:.1f}", len(accepted), kind.value,  # noqa:E501
                        float(np.mean([item.length for item in accepted])))
    finally:
        if pool is not None:
            pool.shutdown()
    dataset = DemoDataset(episodes, seed=seed, failures=failures)
    logger.info("demonstration yield {:.3f} ({} episodes, {} planner failures)",  # noqa:E501
                dataset.yield_rate, len(dataset), failures)
    if dataset.yield_rate < MIN_YIELD:
        raise DemoYieldError(f"demonstration yield {dataset.yield_rate:.3f} is below {MIN_YIELD}")  # noqa:E501
    return dataset
