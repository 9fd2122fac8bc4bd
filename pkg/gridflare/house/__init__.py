# coding:utf-8

from gridflare.house.actions import ACTION_COUNT  # noqa:F401
from gridflare.house.actions import Action  # noqa:F401
from gridflare.house.actions import EmbodimentMask  # noqa:F401
from gridflare.house.actions import mask_for_embodiment  # noqa:F401
from gridflare.house.env import AgentState  # noqa:F401
from gridflare.house.env import EnvConfig  # noqa:F401
from gridflare.house.env import GridHouseEnv  # noqa:F401
from gridflare.house.env import Observation  # noqa:F401
from gridflare.house.env import reset  # noqa:F401
from gridflare.house.env import success_check  # noqa:F401
from gridflare.house.layout import House  # noqa:F401
from gridflare.house.layout import ObjectInstance  # noqa:F401
from gridflare.house.layout import generate_house  # noqa:F401
from gridflare.house.planner import expert_rollout  # noqa:F401
from gridflare.house.records import EpisodeRecord  # noqa:F401
from gridflare.house.tasks import BASE_TASKS  # noqa:F401
from gridflare.house.tasks import NOVEL_TASKS  # noqa:F401
from gridflare.house.tasks import Instruction  # noqa:F401
from gridflare.house.tasks import TaskKind  # noqa:F401
from gridflare.house.tasks import sample_instruction  # noqa:F401
from gridflare.house.vector import EVAL_SEEDS  # noqa:F401
from gridflare.house.vector import TRAIN_SEEDS  # noqa:F401
from gridflare.house.vector import EpisodeSpec  # noqa:F401
from gridflare.house.vector import VectorEnv  # noqa:F401
from gridflare.house.vector import episode_specs  # noqa:F401
