# coding:utf-8

from gridflare.rl.config import TrainConfig  # noqa:F401
from gridflare.rl.gae import compute_gae  # noqa:F401
from gridflare.rl.gae import normalize_advantages  # noqa:F401
from gridflare.rl.ppo import PPOStats  # noqa:F401
from gridflare.rl.ppo import ppo_update  # noqa:F401
from gridflare.rl.ppo import training_forward  # noqa:F401
from gridflare.rl.rollout import RolloutBatch  # noqa:F401
from gridflare.rl.rollout import RolloutCollector  # noqa:F401
from gridflare.rl.sac import ReplayBuffer  # noqa:F401
from gridflare.rl.sac import sac_update  # noqa:F401
from gridflare.rl.trainer import FinetuneResult  # noqa:F401
from gridflare.rl.trainer import finetune  # noqa:F401
