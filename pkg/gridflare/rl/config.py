# coding:utf-8

from dataclasses import dataclass
from typing import List
from typing import Optional

from gridflare.config import ConfigMixin
from gridflare.errors import ConfigError
from gridflare.house.env import EnvConfig
from gridflare.house.tasks import parse_task

ALGORITHMS = ("ppo", "sac")
INITS = ("finetune", "scratch")
CONTEXTS = ("window", "full")


@dataclass(frozen=True)
class TrainConfig(ConfigMixin):
    task: str = "fetch"
    algo: str = "ppo"
    init: str = "finetune"
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.1
    value_weight: float = 0.5
    entropy_weight: float = 0.0
    repeats: int = 4
    minibatches: int = 1
    max_grad_norm: float = 0.5
    scratch_lr: float = 2e-4
    finetune_lr: float = 2e-5
    # explicit rate; None picks the one matching ``init``
    lr: Optional[float] = None
    shared_ac: bool = False
    normalize_advantages: bool = True
    context: str = "window"
    workers: int = 32
    rollout_steps: int = 128
    total_steps: int = 1_000_000
    eval_every: int = 10
    eval_episodes: int = 200
    step_penalty: bool = False
    collision_penalty: bool = False
    embodiment: str = "a"
    obs_noise: float = 0.0
    sac_alpha: float = 0.01
    sac_tau: float = 0.005
    sac_batch: int = 256
    sac_updates: int = 32
    buffer_capacity: int = 100_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "task", parse_task(self.task).value)
        object.__setattr__(self, "embodiment", str(self.embodiment).lower())
        for name, value, options in (("algo", self.algo, ALGORITHMS), ("init", self.init, INITS),  # noqa:E501
                                     ("context", self.context, CONTEXTS)):
            if value not in options:
                raise ConfigError(f"{name} must be one of {', '.join(options)}, got {value!r}")  # noqa:E501
        for name in ("repeats", "minibatches", "workers", "rollout_steps", "total_steps",  # noqa:E501
                     "eval_every", "eval_episodes", "sac_batch", "sac_updates", "buffer_capacity"):  # noqa:E501
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")  # noqa:E501
        if self.minibatches != 1:
            raise ConfigError("only full-batch updates are supported (minibatches = 1)")  # noqa:E501
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gamma and gae_lambda must lie in [0, 1]")
        if self.clip <= 0 or self.max_grad_norm <= 0:
            raise ConfigError("clip and max_grad_norm must be positive")
        if not 0.0 < self.sac_tau <= 1.0:
            raise ConfigError(f"sac_tau must be in (0, 1], got {self.sac_tau}")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        self.env_config()

    @property
    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return self.scratch_lr if self.init == "scratch" else self.finetune_lr

    def env_config(self) -> EnvConfig:
        return EnvConfig(embodiment=self.embodiment, step_penalty=self.step_penalty,  # noqa:E501
                         collision_penalty=self.collision_penalty, obs_noise=self.obs_noise)  # noqa:E501

    def variant(self) -> List[str]:
        """Names of the stabilizer and adaptation knobs this run turns."""
        labels: List[str] = []
        if self.init == "finetune" and self.learning_rate != self.finetune_lr:
            labels.append("lr_x10" if abs(self.learning_rate - 10 * self.finetune_lr) < 1e-12 else "lr")  # noqa:E501
        if self.init == "scratch":
            labels.append("scratch")
        if self.entropy_weight:
            labels.append(f"eb_{self.entropy_weight:g}")
        if self.shared_ac:
            labels.append("shared_ac")
        if self.algo != "ppo":
            labels.append(self.algo)
        if self.step_penalty:
            labels.append("step_pen")
        if self.collision_penalty:
            labels.append("coll_pen")
        if self.embodiment != "a":
            labels.append(f"embodiment_{self.embodiment}")
        return labels or ["flare"]
