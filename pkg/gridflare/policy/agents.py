# coding:utf-8

from typing import Any
from typing import List
from typing import Optional

import numpy as np

from gridflare.house.actions import Action
from gridflare.house.actions import EmbodimentMask
from gridflare.house.actions import mask_for_embodiment
from gridflare.house.env import EnvConfig
from gridflare.house.env import Observation
from gridflare.house.layout import House
from gridflare.house.planner import expert_rollout
from gridflare.house.tasks import Instruction
from gridflare.policy.act import act
from gridflare.policy.network import KVCache
from gridflare.policy.network import PolicyNet


class Agent():
    """Chooses actions for one episode at a time."""

    name: str = "agent"

    def __init__(self, config: Optional[EnvConfig] = None):
        self.__config: EnvConfig = config or EnvConfig()

    @property
    def config(self) -> EnvConfig:
        return self.__config

    @property
    def mask(self) -> EmbodimentMask:
        return mask_for_embodiment(self.__config.embodiment)

    def reset(self, house: House, instruction: Instruction, seed: int) -> None:  # noqa:E501
        pass

    def act(self, observation: Observation, t: int, prev_action: Optional[int]) -> int:  # noqa:E501
        raise NotImplementedError


class PolicyAgent(Agent):
    name = "policy"

    def __init__(self, net: PolicyNet, config: Optional[EnvConfig] = None,
                 mode: str = "argmax", seed: int = 0):
        super().__init__(config)
        self.__net: PolicyNet = net
        self.__mode: str = mode
        self.__rng: np.random.Generator = np.random.default_rng(seed)
        self.__cache: KVCache = net.new_cache()
        self.__episode: Any = None

    @property
    def net(self) -> PolicyNet:
        return self.__net

    def reset(self, house: House, instruction: Instruction, seed: int) -> None:  # noqa:E501
        self.__episode = (house.seed, instruction.text, seed)
        self.__cache.reset(episode=self.__episode)

    def act(self, observation: Observation, t: int, prev_action: Optional[int]) -> int:  # noqa:E501
        net = self.__net
        state = net.encode_state(observation.tokens())
        previous = net.start_action if prev_action is None else prev_action
        belief = net.decoder_step(state.data[0], previous, t, self.__cache, self.__episode)  # noqa:E501
        action, _, _ = act(net.actor_logits(belief), self.mask.valid, self.__mode, self.__rng)  # noqa:E501
        return action


class ExpertAgent(Agent):
    name = "expert"

    def __init__(self, config: Optional[EnvConfig] = None):
        super().__init__(config)
        self.__actions: List[int] = []

    def reset(self, house: House, instruction: Instruction, seed: int) -> None:  # noqa:E501
        self.__actions = expert_rollout(house, instruction, seed, self.config)

    def act(self, observation: Observation, t: int, prev_action: Optional[int]) -> int:  # noqa:E501
        return self.__actions[t] if t < len(self.__actions) else int(Action.DONE)  # noqa:E501


class RandomAgent(Agent):
    name = "random"

    def __init__(self, config: Optional[EnvConfig] = None, seed: int = 0):
        super().__init__(config)
        self.__rng: np.random.Generator = np.random.default_rng(seed)

    def act(self, observation: Observation, t: int, prev_action: Optional[int]) -> int:  # noqa:E501
        valid = self.mask.valid_indices
        return int(valid[int(self.__rng.integers(len(valid)))])
