# coding:utf-8

from gridflare.policy.act import act  # noqa:F401
from gridflare.policy.act import masked_distribution  # noqa:F401
from gridflare.policy.act import masked_log_probs  # noqa:F401
from gridflare.policy.agents import Agent  # noqa:F401
from gridflare.policy.agents import ExpertAgent  # noqa:F401
from gridflare.policy.agents import PolicyAgent  # noqa:F401
from gridflare.policy.agents import RandomAgent  # noqa:F401
from gridflare.policy.config import PolicyConfig  # noqa:F401
from gridflare.policy.config import preset  # noqa:F401
from gridflare.policy.network import KVCache  # noqa:F401
from gridflare.policy.network import PolicyNet  # noqa:F401
from gridflare.policy.network import init_finetune  # noqa:F401
