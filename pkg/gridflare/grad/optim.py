# coding:utf-8

import math
from typing import Dict
from typing import Iterable
from typing import Mapping

import numpy as np

from gridflare.grad.tensor import Tensor


def global_grad_norm(params: Iterable[Tensor]) -> float:
    total = 0.0
    for param in params:
        if param.grad is not None:
            total += float(np.sum(np.square(param.grad, dtype=np.float64)))
    return math.sqrt(total)


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Scale all gradients down so their global L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    params = [param for param in params if param.grad is not None]
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / norm
        for param in params:
            param.scale_grad(factor)
    return norm


class AdamState():
    """Adam moments and hyperparameters for a named parameter set."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):  # noqa:E501
        self.__lr: float = float(lr)
        self.__beta1: float = float(beta1)
        self.__beta2: float = float(beta2)
        self.__epsilon: float = float(epsilon)
        self.__step: int = 0
        self.__first: Dict[str, np.ndarray] = {}
        self.__second: Dict[str, np.ndarray] = {}

    @property
    def lr(self) -> float:
        return self.__lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.__lr = float(value)

    @property
    def beta1(self) -> float:
        return self.__beta1

    @property
    def beta2(self) -> float:
        return self.__beta2

    @property
    def epsilon(self) -> float:
        return self.__epsilon

    @property
    def step_count(self) -> int:
        return self.__step

    def moments(self, name: str):
        return self.__first[name], self.__second[name]

    def step(self, params: Mapping[str, Tensor]) -> None:
        self.__step += 1
        t = self.__step
        correct1 = 1.0 - self.__beta1 ** t
        correct2 = 1.0 - self.__beta2 ** t
        for name, param in params.items():
            if param.grad is None:
                continue
            grad = param.grad.astype(np.float64)
            if name not in self.__first:
                self.__first[name] = np.zeros(param.shape, dtype=np.float64)
                self.__second[name] = np.zeros(param.shape, dtype=np.float64)
            first, second = self.__first[name], self.__second[name]
            first *= self.__beta1
            first += (1.0 - self.__beta1) * grad
            second *= self.__beta2
            second += (1.0 - self.__beta2) * grad * grad
            update = (first / correct1) / (np.sqrt(second / correct2) + self.__epsilon)  # noqa:E501
            param.assign(param.data - self.__lr * update)
            param.zero_grad()
