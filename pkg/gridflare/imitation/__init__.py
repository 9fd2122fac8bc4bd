# coding:utf-8

from gridflare.imitation.bc import BCResult  # noqa:F401
from gridflare.imitation.bc import Chunk  # noqa:F401
from gridflare.imitation.bc import bc_update  # noqa:F401
from gridflare.imitation.bc import chunk_episode  # noqa:F401
from gridflare.imitation.bc import train_bc  # noqa:F401
from gridflare.imitation.config import BCConfig  # noqa:F401
from gridflare.imitation.demos import DemoDataset  # noqa:F401
from gridflare.imitation.demos import DemoEpisode  # noqa:F401
from gridflare.imitation.demos import generate_demos  # noqa:F401
