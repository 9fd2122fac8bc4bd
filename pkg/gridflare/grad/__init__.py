# coding:utf-8

from gridflare.grad.ops import add  # noqa:F401
from gridflare.grad.ops import clip  # noqa:F401
from gridflare.grad.ops import concat  # noqa:F401
from gridflare.grad.ops import cross_entropy  # noqa:F401
from gridflare.grad.ops import embedding  # noqa:F401
from gridflare.grad.ops import entropy  # noqa:F401
from gridflare.grad.ops import exp  # noqa:F401
from gridflare.grad.ops import getitem  # noqa:F401
from gridflare.grad.ops import layer_norm  # noqa:F401
from gridflare.grad.ops import log  # noqa:F401
from gridflare.grad.ops import log_softmax  # noqa:F401
from gridflare.grad.ops import matmul  # noqa:F401
from gridflare.grad.ops import mean  # noqa:F401
from gridflare.grad.ops import minimum  # noqa:F401
from gridflare.grad.ops import mul  # noqa:F401
from gridflare.grad.ops import pick  # noqa:F401
from gridflare.grad.ops import relu  # noqa:F401
from gridflare.grad.ops import reshape  # noqa:F401
from gridflare.grad.ops import scale  # noqa:F401
from gridflare.grad.ops import softmax  # noqa:F401
from gridflare.grad.ops import sub  # noqa:F401
from gridflare.grad.ops import transpose  # noqa:F401
from gridflare.grad.optim import AdamState  # noqa:F401
from gridflare.grad.optim import clip_grad_norm  # noqa:F401
from gridflare.grad.optim import global_grad_norm  # noqa:F401
from gridflare.grad.tensor import Tape  # noqa:F401
from gridflare.grad.tensor import Tensor  # noqa:F401
from gridflare.grad.tensor import backward  # noqa:F401
