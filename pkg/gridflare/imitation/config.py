# coding:utf-8

from dataclasses import dataclass
from typing import Tuple

from gridflare.config import ConfigMixin
from gridflare.errors import ConfigError
from gridflare.house.tasks import parse_task


@dataclass(frozen=True)
class BCConfig(ConfigMixin):
    epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-3
    chunk: int = 64
    eval_fraction: float = 0.05
    eval_every: int = 200
    eval_episodes: int = 50
    eval_tasks: Tuple[str, ...] = ("objectnav",)
    max_grad_norm: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "chunk", "eval_every", "eval_episodes"):  # noqa:E501
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")  # noqa:E501
        if self.lr <= 0 or self.max_grad_norm <= 0:
            raise ConfigError("lr and max_grad_norm must be positive")
        if not 0.0 <= self.eval_fraction < 1.0:
            raise ConfigError(f"eval_fraction must be in [0, 1), got {self.eval_fraction}")  # noqa:E501
        object.__setattr__(self, "eval_tasks", tuple(parse_task(task).value for task in self.eval_tasks))  # noqa:E501
