# coding:utf-8

from dataclasses import dataclass
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from gridflare.house.actions import ACTION_COUNT
from gridflare.house.tokens import OBSERVATION_TOKENS
from gridflare.house.vector import VectorEnv
from gridflare.policy.act import act
from gridflare.policy.network import KVCache
from gridflare.policy.network import PolicyNet
from gridflare.rl.config import TrainConfig

START = ACTION_COUNT

Prefix = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class RolloutBatch:
    """One collection phase: ``workers`` streams of ``horizon`` steps.

    ``dones`` split every stream into episode segments; ``truncated`` marks
    the done steps that ran out of time. ``prefixes`` holds, per worker, the
    observation tokens and previous actions of the episode steps before the
    window when the run replays full episodes.
    """
    tokens: np.ndarray
    next_tokens: np.ndarray
    prev_actions: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    truncated: np.ndarray
    next_values: np.ndarray
    steps: np.ndarray
    valid: np.ndarray
    bootstrap: np.ndarray
    context: str = "window"
    prefixes: Tuple[Prefix, ...] = ()
    episodes: Tuple[Dict[str, Any], ...] = ()

    @property
    def workers(self) -> int:
        return int(self.actions.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.actions.shape[1])

    @property
    def size(self) -> int:
        return int(self.actions.size)

    def segments(self, worker: int) -> np.ndarray:
        dones = self.dones[worker]
        return np.concatenate([[0], np.cumsum(dones[:-1])]).astype(np.int64)

    def prefix(self, worker: int) -> Optional[Prefix]:
        if self.context != "full" or not self.prefixes:
            return None
        tokens, previous = self.prefixes[worker]
        return (tokens, previous) if previous.shape[0] else None

    def episode_stats(self) -> Dict[str, float]:
        if not self.episodes:
            return {"mean_sparse_return": float("nan"), "mean_ep_len": float("nan"), "mean_collisions": float("nan")}  # noqa:E501
        return {"mean_sparse_return": float(np.mean([float(item["success"]) for item in self.episodes])),  # noqa:E501
                "mean_ep_len": float(np.mean([item["length"] for item in self.episodes])),  # noqa:E501
                "mean_collisions": float(np.mean([item["collisions"] for item in self.episodes]))}  # noqa:E501


class RolloutCollector():
    """Steps a vector environment against frozen networks.

    The collector owns the per-worker episode state across phases. At the
    start of every phase the decoder caches restart at each worker's current
    episode step (``window``) or are rebuilt from the episode so far under the
    current parameters (``full``).
    """

    def __init__(self, env: VectorEnv, config: TrainConfig):
        self.__env: VectorEnv = env
        self.__config: TrainConfig = config
        self.__rng: np.random.Generator = np.random.default_rng([config.seed, 3])  # noqa:E501
        self.__previous: np.ndarray = np.full(env.workers, START, dtype=np.int64)  # noqa:E501
        self.__history: List[List[Tuple[np.ndarray, int]]] = [[] for _ in range(env.workers)]  # noqa:E501
        self.__returns: np.ndarray = np.zeros(env.workers, dtype=np.float64)
        self.__episode_index: np.ndarray = np.zeros(env.workers, dtype=np.int64)  # noqa:E501
        self.__started: bool = False

    @property
    def env(self) -> VectorEnv:
        return self.__env

    def _prefix(self, worker: int) -> Prefix:
        history = self.__history[worker]
        if not history:
            return np.zeros((0, OBSERVATION_TOKENS), dtype=np.int64), np.zeros(0, dtype=np.int64)  # noqa:E501
        return np.stack([row for row, _ in history]), np.asarray([prev for _, prev in history], dtype=np.int64)  # noqa:E501

    def _episode(self, worker: int) -> Tuple[int, int]:
        return worker, int(self.__episode_index[worker])

    def _cache(self, net: PolicyNet, worker: int, step: int) -> KVCache:
        if self.__config.context == "full" and step > 0:
            tokens, previous = self._prefix(worker)
            return net.replay(tokens, previous, np.arange(step), self._episode(worker))  # noqa:E501
        return net.new_cache(offset=step, episode=self._episode(worker))

    def collect(self, actor: PolicyNet, critic: Optional[PolicyNet] = None) -> RolloutBatch:  # noqa:E501
        """Sample one phase. ``critic`` may be the actor itself or None."""
        env, cfg = self.__env, self.__config
        if not self.__started:
            env.reset_all()
            self.__started = True
        workers, horizon = env.workers, cfg.rollout_steps
        separate = critic is not None and critic is not actor
        valid = env.mask.valid.copy()
        start_steps = env.episode_steps
        prefixes = tuple(self._prefix(w) for w in range(workers)) if cfg.context == "full" else ()  # noqa:E501
        actor_caches = [self._cache(actor, w, int(start_steps[w])) for w in range(workers)]  # noqa:E501
        critic_caches = [self._cache(critic, w, int(start_steps[w])) for w in range(workers)] if separate else actor_caches  # type: ignore[arg-type]  # noqa:E501

        tokens = np.zeros((workers, horizon, OBSERVATION_TOKENS), dtype=np.int64)  # noqa:E501
        next_tokens = np.zeros_like(tokens)
        prev_actions = np.zeros((workers, horizon), dtype=np.int64)
        actions = np.zeros((workers, horizon), dtype=np.int64)
        steps = np.zeros((workers, horizon), dtype=np.int64)
        log_probs = np.zeros((workers, horizon), dtype=np.float64)
        values = np.zeros((workers, horizon), dtype=np.float64)
        rewards = np.zeros((workers, horizon), dtype=np.float64)
        next_values = np.zeros((workers, horizon), dtype=np.float64)
        dones = np.zeros((workers, horizon), dtype=bool)
        truncated = np.zeros((workers, horizon), dtype=bool)
        episodes: List[Dict[str, Any]] = []

        def value_of(state: np.ndarray, worker: int, previous: int, step: int, belief: Optional[np.ndarray] = None) -> float:  # noqa:E501
            if critic is None:
                return 0.0
            if belief is None or separate:
                belief = critic.decoder_step(state, previous, step, critic_caches[worker], self._episode(worker))  # noqa:E501
            return float(critic.value(belief).item())

        for t in range(horizon):
            tokens[:, t] = np.stack([obs.tokens() for obs in env.observations])  # noqa:E501
            steps[:, t] = env.episode_steps
            prev_actions[:, t] = self.__previous
            states = actor.encode_state(tokens[:, t]).data
            critic_states = critic.encode_state(tokens[:, t]).data if separate else states  # type: ignore[union-attr]  # noqa:E501
            for w in range(workers):
                belief = actor.decoder_step(states[w], int(self.__previous[w]), int(steps[w, t]), actor_caches[w], self._episode(w))  # noqa:E501
                action, log_prob, _ = act(actor.actor_logits(belief).data, valid, "sample", self.__rng)  # noqa:E501
                actions[w, t], log_probs[w, t] = action, log_prob
                values[w, t] = value_of(critic_states[w], w, int(self.__previous[w]), int(steps[w, t]), belief)  # noqa:E501
            observations, rewards[:, t], dones[:, t], infos = env.step_all(actions[:, t])  # noqa:E501
            next_tokens[:, t] = np.stack([obs.tokens() for obs in observations])  # noqa:E501
            for w in range(workers):
                self.__returns[w] += rewards[w, t]
                if cfg.context == "full":
                    self.__history[w].append((tokens[w, t], int(self.__previous[w])))  # noqa:E501
                if not dones[w, t]:
                    self.__previous[w] = actions[w, t]
                    continue
                info = infos[w]
                truncated[w, t] = bool(info["truncated"])
                if truncated[w, t]:
                    final = critic.encode_state(next_tokens[w, t]).data[0] if critic is not None else None  # noqa:E501
                    next_values[w, t] = value_of(final, w, int(actions[w, t]), int(steps[w, t]) + 1)  # type: ignore[arg-type]  # noqa:E501
                episodes.append({"task": info["task"], "success": bool(info["success"]), "length": int(info["steps"]),  # noqa:E501
                                 "collisions": int(info["collisions"]), "expert_length": info["expert_length"],  # noqa:E501
                                 "return": float(self.__returns[w])})
                self.__returns[w] = 0.0
                self.__episode_index[w] += 1
                self.__history[w] = []
                self.__previous[w] = START
            for w in env.reset_done():
                actor_caches[w] = actor.new_cache(episode=self._episode(w))
                if separate:
                    critic_caches[w] = critic.new_cache(episode=self._episode(w))  # type: ignore[union-attr]  # noqa:E501
                elif critic is actor:
                    critic_caches[w] = actor_caches[w]

        bootstrap = np.zeros(workers, dtype=np.float64)
        if critic is not None:
            current = np.stack([obs.tokens() for obs in env.observations])
            critic_states = critic.encode_state(current).data
            current_steps = env.episode_steps
            for w in range(workers):
                bootstrap[w] = value_of(critic_states[w], w, int(self.__previous[w]), int(current_steps[w]))  # noqa:E501
        return RolloutBatch(tokens=tokens, next_tokens=next_tokens, prev_actions=prev_actions,  # noqa:E501
                            actions=actions, log_probs=log_probs, values=values, rewards=rewards,  # noqa:E501
                            dones=dones, truncated=truncated, next_values=next_values, steps=steps,  # noqa:E501
                            valid=valid, bootstrap=bootstrap, context=cfg.context,  # noqa:E501
                            prefixes=prefixes, episodes=tuple(episodes))
