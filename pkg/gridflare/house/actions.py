# coding:utf-8

from enum import IntEnum
from typing import Dict
from typing import Tuple

import numpy as np

from gridflare.errors import ConfigError

ACTION_COUNT = 20


class Action(IntEnum):
    MOVE_AHEAD = 0
    MOVE_BACK = 1
    ROTATE_LEFT = 2
    ROTATE_RIGHT = 3
    # small turns keep the appendix cardinality; on the grid they are 90 degrees  # noqa:E501
    ROTATE_LEFT_SMALL = 4
    ROTATE_RIGHT_SMALL = 5
    ARM_EXTEND = 6
    ARM_RETRACT = 7
    ARM_UP = 8
    ARM_DOWN = 9
    WRIST_CW = 10
    WRIST_CCW = 11
    PICKUP = 12
    DROPOFF = 13
    SUB_DONE = 14
    DONE = 15
    RESERVED_0 = 16
    RESERVED_1 = 17
    RESERVED_2 = 18
    RESERVED_3 = 19


MOVES = (Action.MOVE_AHEAD, Action.MOVE_BACK)
TURNS_LEFT = (Action.ROTATE_LEFT, Action.ROTATE_LEFT_SMALL)
TURNS_RIGHT = (Action.ROTATE_RIGHT, Action.ROTATE_RIGHT_SMALL)
MANIPULATION = (Action.ARM_EXTEND, Action.ARM_RETRACT, Action.ARM_UP, Action.ARM_DOWN,  # noqa:E501
                Action.WRIST_CW, Action.WRIST_CCW, Action.PICKUP, Action.DROPOFF)  # noqa:E501

CAMERA_TILT_UP = Action.RESERVED_0
CAMERA_TILT_DOWN = Action.RESERVED_1

EMBODIMENTS: Tuple[str, ...] = ("a", "b")


class EmbodimentMask():
    """Valid action indices of a robot body and the reserved indices it repurposes."""  # noqa:E501

    def __init__(self, embodiment: str, valid: np.ndarray, repurposed: Dict[int, str]):  # noqa:E501
        self.__embodiment: str = embodiment
        self.__valid: np.ndarray = valid
        self.__valid.setflags(write=False)
        self.__repurposed: Dict[int, str] = dict(repurposed)

    @property
    def embodiment(self) -> str:
        return self.__embodiment

    @property
    def valid(self) -> np.ndarray:
        return self.__valid

    @property
    def repurposed(self) -> Dict[int, str]:
        return dict(self.__repurposed)

    @property
    def valid_indices(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.__valid))

    def allows(self, action: int) -> bool:
        return bool(self.__valid[action])


def mask_for_embodiment(embodiment: str) -> EmbodimentMask:
    """Embodiment ``a`` is the full mobile manipulator.

    Embodiment ``b`` has no arm and cannot reverse; its camera tilts, driven
    by the first two reserved indices.
    """
    embodiment = str(embodiment).lower()
    if embodiment == "a":
        return EmbodimentMask("a", np.ones(ACTION_COUNT, dtype=bool), {})
    if embodiment == "b":
        valid = np.zeros(ACTION_COUNT, dtype=bool)
        for action in (Action.MOVE_AHEAD, *TURNS_LEFT, *TURNS_RIGHT, Action.SUB_DONE, Action.DONE,  # noqa:E501
                       CAMERA_TILT_UP, CAMERA_TILT_DOWN):
            valid[action] = True
        return EmbodimentMask("b", valid, {int(CAMERA_TILT_UP): "CameraTiltUp", int(CAMERA_TILT_DOWN): "CameraTiltDown"})  # noqa:E501
    raise ConfigError(f"unknown embodiment {embodiment!r}, expected one of {', '.join(EMBODIMENTS)}")  # noqa:E501
