# coding:utf-8

from collections import deque
from dataclasses import replace
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

from gridflare.errors import PlannerError
from gridflare.house.actions import Action
from gridflare.house.env import AgentState
from gridflare.house.env import EnvConfig
from gridflare.house.env import EpisodeContext
from gridflare.house.env import goal_satisfied
from gridflare.house.env import offset
from gridflare.house.env import reset_state
from gridflare.house.env import target_objects
from gridflare.house.env import transition
from gridflare.house.layout import Cell
from gridflare.house.layout import House
from gridflare.house.tasks import Instruction
from gridflare.house.tasks import TaskKind

Pose = Tuple[Cell, int]
NAVIGATION: Tuple[Action, ...] = (Action.MOVE_AHEAD, Action.ROTATE_LEFT, Action.ROTATE_RIGHT, Action.MOVE_BACK)  # noqa:E501


def neighbors(context: EpisodeContext, state: AgentState, pose: Pose) -> List[Tuple[Action, Pose]]:  # noqa:E501
    """Unit-cost successors of a pose; blocked moves are left out."""
    cell, heading = pose
    occupied = state.occupancy()
    mask = context.mask
    result: List[Tuple[Action, Pose]] = []
    for action in NAVIGATION:
        if not mask.allows(action):
            continue
        if action == Action.ROTATE_LEFT:
            result.append((action, (cell, (heading + 3) % 4)))
        elif action == Action.ROTATE_RIGHT:
            result.append((action, (cell, (heading + 1) % 4)))
        else:
            nxt = offset(cell, heading, 1 if action == Action.MOVE_AHEAD else -1, 0)  # noqa:E501
            if context.house.is_floor(nxt) and nxt not in occupied:
                result.append((action, (nxt, heading)))
    return result


def shortest_path(context: EpisodeContext, state: AgentState,
                  is_goal: Callable[[Pose], bool]) -> Optional[List[Action]]:
    """Breadth-first search over (cell, heading) from the agent's pose."""
    start: Pose = (state.position, state.heading)
    parent: Dict[Pose, Optional[Tuple[Pose, Action]]] = {start: None}
    queue = deque([start])
    while queue:
        pose = queue.popleft()
        if is_goal(pose):
            actions: List[Action] = []
            while (link := parent[pose]) is not None:
                pose, action = link
                actions.append(action)
            return actions[::-1]
        for action, nxt in neighbors(context, state, pose):
            if nxt not in parent:
                parent[nxt] = (pose, action)
                queue.append(nxt)
    return None


def _at(state: AgentState, pose: Pose) -> AgentState:
    return replace(state, position=pose[0], heading=pose[1])


def _simulate(context: EpisodeContext, state: AgentState, actions: List[Action]) -> AgentState:  # noqa:E501
    for action in actions:
        state, _, _, _ = transition(context, state, action)
    return state


def plan(context: EpisodeContext, state: AgentState) -> List[Action]:
    """Expert actions that complete the instruction from ``state``."""
    kind = context.instruction.kind
    if kind in (TaskKind.PICKUP, TaskKind.FETCH):
        if goal_satisfied(context, state):
            return [Action.DONE]
        cells = {state.object_positions[item.id] for item in target_objects(context) if item.pickupable}  # noqa:E501
        path = shortest_path(context, state, lambda pose: offset(pose[0], pose[1], 1, 0) in cells)  # noqa:E501
        if path is None:
            raise PlannerError(f"no reachable {context.instruction.target[0]} in house {context.house.seed}")  # noqa:E501
        # retract so the first object along the reach is the adjacent one
        return path + [Action.ARM_RETRACT] * state.arm_extension + [Action.PICKUP, Action.DONE]  # noqa:E501
    if kind == TaskKind.ROOM_VISIT:
        actions: List[Action] = []
        marked = set(state.marked_rooms)
        while len(marked) < context.house.room_count:
            path = shortest_path(context, state, lambda pose: context.house.room_of(pose[0]) not in marked)  # noqa:E501
            if path is None:
                raise PlannerError(f"unreachable room in house {context.house.seed}")  # noqa:E501
            actions += path + [Action.SUB_DONE]
            state = _simulate(context, state, path + [Action.SUB_DONE])
            marked = set(state.marked_rooms)
        return actions + [Action.DONE]
    path = shortest_path(context, state, lambda pose: goal_satisfied(context, _at(state, pose)))  # noqa:E501
    if path is None:
        raise PlannerError(f"cannot satisfy {context.instruction.text!r} in house {context.house.seed}")  # noqa:E501
    return path + [Action.DONE]


def expert_rollout(house: House, instruction: Instruction, seed: int,
                   config: Optional[EnvConfig] = None) -> List[int]:
    """Planner actions from the reset drawn with ``seed``, verified by replay.

    The length of the returned list is the expert length used by SEL.
    """
    context = EpisodeContext(house=house, instruction=instruction, config=config or EnvConfig())  # noqa:E501
    start = reset_state(context, seed)
    actions = plan(context, start)
    if len(actions) > context.task.max_steps:
        raise PlannerError(f"expert needs {len(actions)} steps, limit is {context.task.max_steps}")  # noqa:E501
    final = _simulate(context, start, actions)
    if not final.success:
        raise PlannerError(f"expert replay failed for {instruction.text!r} in house {house.seed}")  # noqa:E501
    return [int(action) for action in actions]
