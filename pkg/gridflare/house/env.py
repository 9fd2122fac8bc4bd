# coding:utf-8

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from gridflare.config import ConfigMixin
from gridflare.errors import ConfigError
from gridflare.errors import ContractError
from gridflare.errors import UnsatisfiableInstructionError
from gridflare.house.actions import ACTION_COUNT
from gridflare.house.actions import CAMERA_TILT_DOWN
from gridflare.house.actions import CAMERA_TILT_UP
from gridflare.house.actions import EMBODIMENTS
from gridflare.house.actions import Action
from gridflare.house.actions import EmbodimentMask
from gridflare.house.actions import mask_for_embodiment
from gridflare.house.layout import MAX_ROOMS
from gridflare.house.layout import MIN_ROOMS
from gridflare.house.layout import STEPS
from gridflare.house.layout import Cell
from gridflare.house.layout import House
from gridflare.house.layout import ObjectInstance
from gridflare.house.tasks import TASK_SPECS
from gridflare.house.tasks import Instruction
from gridflare.house.tasks import TaskKind
from gridflare.house.tasks import TaskSpec
from gridflare.house.tasks import extremal_instance
from gridflare.house.tasks import matches
from gridflare.house.tokens import CELL_FLOOR
from gridflare.house.tokens import CELL_VOCAB
from gridflare.house.tokens import CELL_WALL
from gridflare.house.tokens import WINDOW
from gridflare.house.tokens import floor_token
from gridflare.house.tokens import held_token
from gridflare.house.tokens import object_token
from gridflare.house.tokens import tilt_token

STEP_PENALTY = -0.01
COLLISION_PENALTY = -0.5
MAX_ARM_EXTENSION = 3
HEADINGS = ("N", "E", "S", "W")


@dataclass(frozen=True)
class EnvConfig(ConfigMixin):
    room_counts: Tuple[int, int] = (2, 4)
    embodiment: str = "a"
    step_penalty: bool = False
    collision_penalty: bool = False
    # chance that a visible cell token is swapped for a random floor or
    # object token
    obs_noise: float = 0.0

    def __post_init__(self):
        low, high = self.room_counts
        if not MIN_ROOMS <= low <= high <= MAX_ROOMS:
            raise ConfigError(f"room_counts must lie in [{MIN_ROOMS}, {MAX_ROOMS}], got {self.room_counts}")  # noqa:E501
        object.__setattr__(self, "embodiment", str(self.embodiment).lower())
        if self.embodiment not in EMBODIMENTS:
            raise ConfigError(f"unknown embodiment {self.embodiment!r}")
        if not 0.0 <= self.obs_noise < 1.0:
            raise ConfigError(f"obs_noise must be in [0, 1), got {self.obs_noise}")  # noqa:E501

    @property
    def shaped(self) -> bool:
        return self.step_penalty or self.collision_penalty


@dataclass(frozen=True)
class AgentState:
    position: Cell
    heading: int
    object_positions: Tuple[Optional[Cell], ...]
    arm_extension: int = 0
    held_object: Optional[int] = None
    camera_tilt: int = 0
    collisions: int = 0
    steps: int = 0
    marked_rooms: Tuple[int, ...] = ()
    # the last step moved the agent into its current room (true at reset)
    entered_room: bool = True
    fault: bool = False
    done: bool = False
    success: bool = False

    def occupancy(self) -> Dict[Cell, int]:
        return {cell: index for index, cell in enumerate(self.object_positions) if cell is not None}  # noqa:E501


@dataclass(frozen=True)
class Observation:
    window: np.ndarray
    proprio: np.ndarray
    instruction: np.ndarray

    def tokens(self) -> np.ndarray:
        return np.concatenate([self.window.reshape(-1), self.proprio, self.instruction])  # noqa:E501


@dataclass(frozen=True)
class EpisodeContext:
    """Everything about an episode that stays fixed while the agent acts."""
    house: House
    instruction: Instruction
    config: EnvConfig = field(default_factory=EnvConfig)

    @property
    def task(self) -> TaskSpec:
        return TASK_SPECS[self.instruction.kind]

    @property
    def mask(self) -> EmbodimentMask:
        return mask_for_embodiment(self.config.embodiment)


def offset(position: Cell, heading: int, forward: int, lateral: int) -> Cell:
    fr, fc = STEPS[heading]
    rr, rc = STEPS[(heading + 1) % 4]
    return (position[0] + forward * fr + lateral * rr, position[1] + forward * fc + lateral * rc)  # noqa:E501


def window_cells(state: AgentState) -> List[Tuple[int, int, Cell]]:
    """(row, col, house cell) for every window slot.

    The bottom row is the agent's own row and the middle column its own
    column; camera tilt shifts the rows one cell forward or backward.
    """
    cells = []
    for row in range(WINDOW):
        for col in range(WINDOW):
            forward = WINDOW - 1 - row + state.camera_tilt
            lateral = col - WINDOW // 2
            cells.append((row, col, offset(state.position, state.heading, forward, lateral)))  # noqa:E501
    return cells


def visible_cells(state: AgentState) -> List[Cell]:
    return [cell for _, _, cell in window_cells(state)]


def observe(context: EpisodeContext, state: AgentState,
            rng: Optional[np.random.Generator] = None) -> Observation:
    house = context.house
    occupancy = state.occupancy()
    window = np.full((WINDOW, WINDOW), CELL_WALL, dtype=np.int64)
    for row, col, cell in window_cells(state):
        if not house.is_floor(cell):
            continue
        if (index := occupancy.get(cell)) is not None:
            item = house.objects[index]
            window[row, col] = object_token(item.category, item.size_class)
        else:
            window[row, col] = floor_token(house.room_type_at(cell))
    if rng is not None and context.config.obs_noise > 0.0:
        noisy = rng.random((WINDOW, WINDOW)) < context.config.obs_noise
        if 0 <= (own := WINDOW - 1 + state.camera_tilt) < WINDOW:
            noisy[own, WINDOW // 2] = False
        replacement = rng.integers(CELL_FLOOR, CELL_VOCAB, size=(WINDOW, WINDOW))  # noqa:E501
        window = np.where(noisy, replacement, window)
    held = None if state.held_object is None else house.objects[state.held_object].category  # noqa:E501
    proprio = np.asarray([state.arm_extension, held_token(held), tilt_token(state.camera_tilt)], dtype=np.int64)  # noqa:E501
    return Observation(window=window, proprio=proprio, instruction=context.instruction.tokens())  # noqa:E501


def target_objects(context: EpisodeContext) -> List[ObjectInstance]:
    instruction = context.instruction
    if instruction.kind == TaskKind.OBJ_NAV_REL_ATTR:
        best = extremal_instance(context.house, *instruction.target)
        return [] if best is None else [best]
    return [item for item in context.house.objects if matches(item, instruction)]  # noqa:E501


def goal_satisfied(context: EpisodeContext, state: AgentState) -> bool:
    """Whether issuing Done in ``state`` would succeed."""
    house, kind = context.house, context.instruction.kind
    if kind in (TaskKind.PICKUP, TaskKind.FETCH):
        return state.held_object is not None and house.objects[state.held_object].category == context.instruction.target[0]  # noqa:E501
    if kind == TaskKind.ROOM_VISIT:
        return not state.fault and len(set(state.marked_rooms)) == house.room_count  # noqa:E501
    if kind == TaskKind.ROOM_NAV:
        return house.room_type_at(state.position) == context.instruction.target[0]  # noqa:E501
    seen = set(visible_cells(state))
    proximity = context.task.proximity
    for item in target_objects(context):
        cell = state.object_positions[item.id]
        if cell is None or cell not in seen:
            continue
        if max(abs(cell[0] - state.position[0]), abs(cell[1] - state.position[1])) <= proximity:  # noqa:E501
            return True
    return False


def success_check(house: House, state: AgentState, instruction: Instruction) -> bool:  # noqa:E501
    return goal_satisfied(EpisodeContext(house=house, instruction=instruction), state)  # noqa:E501


def _reach(context: EpisodeContext, state: AgentState) -> List[Cell]:
    cells = []
    for distance in range(1, state.arm_extension + 2):
        cell = offset(state.position, state.heading, distance, 0)
        if not context.house.is_floor(cell):
            break
        cells.append(cell)
    return cells


def _move(context: EpisodeContext, state: AgentState, direction: int) -> Tuple[AgentState, bool]:  # noqa:E501
    cell = offset(state.position, state.heading, direction, 0)
    if not context.house.is_floor(cell) or cell in state.occupancy():
        return replace(state, collisions=state.collisions + 1), True
    return replace(state, position=cell), False


def _pickup(context: EpisodeContext, state: AgentState) -> AgentState:
    if state.held_object is not None:
        return state
    occupancy = state.occupancy()
    for cell in _reach(context, state):
        if (index := occupancy.get(cell)) is not None:
            if not context.house.objects[index].pickupable:
                return state
            positions = list(state.object_positions)
            positions[index] = None
            return replace(state, held_object=index, object_positions=tuple(positions))  # noqa:E501
    return state


def _dropoff(context: EpisodeContext, state: AgentState) -> AgentState:
    if state.held_object is None:
        return state
    occupancy = state.occupancy()
    for cell in reversed(_reach(context, state)):
        if cell not in occupancy:
            positions = list(state.object_positions)
            positions[state.held_object] = cell
            return replace(state, held_object=None, object_positions=tuple(positions))  # noqa:E501
    return state


def transition(context: EpisodeContext, state: AgentState, action: int) -> Tuple[AgentState, float, bool, Dict[str, Any]]:  # noqa:E501
    """Pure environment step: the next state, the reward, done, and info."""
    if not 0 <= int(action) < ACTION_COUNT:
        raise ContractError(f"action index must be in [0, {ACTION_COUNT}), got {action}")  # noqa:E501
    if state.done:
        raise ContractError("step called on a finished episode")
    action = int(action)
    collided = False
    issued_done = False
    room_before = context.house.room_of(state.position)
    if context.mask.allows(action):
        if action == Action.MOVE_AHEAD:
            state, collided = _move(context, state, 1)
        elif action == Action.MOVE_BACK:
            state, collided = _move(context, state, -1)
        elif action in (Action.ROTATE_LEFT, Action.ROTATE_LEFT_SMALL):
            state = replace(state, heading=(state.heading + 3) % 4)
        elif action in (Action.ROTATE_RIGHT, Action.ROTATE_RIGHT_SMALL):
            state = replace(state, heading=(state.heading + 1) % 4)
        elif action == Action.ARM_EXTEND:
            state = replace(state, arm_extension=min(state.arm_extension + 1, MAX_ARM_EXTENSION))  # noqa:E501
        elif action == Action.ARM_RETRACT:
            state = replace(state, arm_extension=max(state.arm_extension - 1, 0))  # noqa:E501
        elif action == Action.PICKUP:
            state = _pickup(context, state)
        elif action == Action.DROPOFF:
            state = _dropoff(context, state)
        elif action == Action.SUB_DONE:
            fault = room_before in state.marked_rooms or not state.entered_room
            state = replace(state, marked_rooms=state.marked_rooms + (room_before,),  # noqa:E501
                            fault=state.fault or fault)
        elif action == Action.DONE:
            issued_done = True
        elif action == CAMERA_TILT_UP and context.config.embodiment == "b":
            state = replace(state, camera_tilt=min(state.camera_tilt + 1, 1))
        elif action == CAMERA_TILT_DOWN and context.config.embodiment == "b":
            state = replace(state, camera_tilt=max(state.camera_tilt - 1, -1))  # noqa:E501
        # arm height, wrist and the remaining reserved indices change nothing on the grid  # noqa:E501
    steps = state.steps + 1
    success = issued_done and goal_satisfied(context, state)
    truncated = not issued_done and steps >= context.task.max_steps
    done = issued_done or truncated
    reward = 1.0 if success else 0.0
    if context.config.step_penalty and not done:
        reward += STEP_PENALTY
    if collided and context.config.collision_penalty:
        reward += COLLISION_PENALTY
    state = replace(state, steps=steps, done=done, success=success,
                    entered_room=context.house.room_of(state.position) != room_before)  # noqa:E501
    info = {"collision": collided, "success": success, "truncated": truncated,  # noqa:E501
            "steps": steps, "collisions": state.collisions}
    return state, reward, done, info


def _initial_state(house: House, position: Cell, heading: int) -> AgentState:
    return AgentState(position=position, heading=heading,
                      object_positions=tuple(item.position for item in house.objects))  # noqa:E501


def reset_state(context: EpisodeContext, seed: int) -> AgentState:
    """Uniform start over free (cell, heading) pairs where Done would not
    already succeed; PickUp starts with a target inside the window."""
    house = context.house
    occupied = {item.position for item in house.objects}
    candidates: List[AgentState] = []
    targets = {item.position for item in target_objects(context)}
    for cell in house.floor_cells():
        if cell in occupied:
            continue
        for heading in range(4):
            state = _initial_state(house, cell, heading)
            if goal_satisfied(context, state):
                continue
            if context.instruction.kind == TaskKind.PICKUP and not targets.intersection(visible_cells(state)):  # noqa:E501
                continue
            candidates.append(state)
    if not candidates:
        raise UnsatisfiableInstructionError(f"house {house.seed} has no start for {context.instruction.text}")  # noqa:E501
    rng = np.random.default_rng(seed)
    return candidates[int(rng.integers(len(candidates)))]


def reset(house: House, instruction: Instruction, seed: int,
          config: Optional[EnvConfig] = None) -> Tuple[AgentState, Observation]:  # noqa:E501
    context = EpisodeContext(house=house, instruction=instruction, config=config or EnvConfig())  # noqa:E501
    state = reset_state(context, seed)
    return state, observe(context, state)


class GridHouseEnv():
    """One episode at a time over a fixed config, owned by a single worker."""

    def __init__(self, config: Optional[EnvConfig] = None):
        self.__config: EnvConfig = config or EnvConfig()
        self.__context: Optional[EpisodeContext] = None
        self.__state: Optional[AgentState] = None
        self.__rng: Optional[np.random.Generator] = None

    @property
    def config(self) -> EnvConfig:
        return self.__config

    @property
    def context(self) -> EpisodeContext:
        if self.__context is None:
            raise ContractError("environment used before reset")
        return self.__context

    @property
    def state(self) -> AgentState:
        if self.__state is None:
            raise ContractError("environment used before reset")
        return self.__state

    @property
    def mask(self) -> EmbodimentMask:
        return mask_for_embodiment(self.__config.embodiment)

    def reset(self, house: House, instruction: Instruction, seed: int) -> Observation:  # noqa:E501
        self.__context = EpisodeContext(house=house, instruction=instruction, config=self.__config)  # noqa:E501
        self.__state = reset_state(self.__context, seed)
        self.__rng = np.random.default_rng([int(seed), 7]) if self.__config.obs_noise > 0 else None  # noqa:E501
        return observe(self.__context, self.__state, self.__rng)

    def step(self, action: int) -> Tuple[Observation, float, bool, Dict[str, Any]]:  # noqa:E501
        self.__state, reward, done, info = transition(self.context, self.state, action)  # noqa:E501
        return observe(self.context, self.__state, self.__rng), reward, done, info  # noqa:E501

    def describe(self) -> str:
        state = self.state
        held = "-" if state.held_object is None else self.context.house.objects[state.held_object].category  # noqa:E501
        return (f"{self.context.instruction.text}: at {state.position} facing {HEADINGS[state.heading]}, "  # noqa:E501
                f"arm {state.arm_extension}, holding {held}, step {state.steps}")  # noqa:E501

