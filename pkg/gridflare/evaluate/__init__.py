# coding:utf-8

from gridflare.evaluate.report import EvalReport  # noqa:F401
from gridflare.evaluate.report import EpisodeResult  # noqa:F401
from gridflare.evaluate.report import evaluate  # noqa:F401
from gridflare.evaluate.report import evaluate_agent  # noqa:F401
from gridflare.evaluate.report import sel  # noqa:F401
