# coding:utf-8

from dataclasses import dataclass
from enum import Enum
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from gridflare.errors import ConfigError
from gridflare.errors import ContractError
from gridflare.errors import UnsatisfiableInstructionError
from gridflare.house.catalog import AFFORDANCES
from gridflare.house.catalog import CATEGORY_INDEX
from gridflare.house.catalog import ROOM_TYPES
from gridflare.house.layout import House
from gridflare.house.layout import ObjectInstance
from gridflare.house.tokens import INSTRUCTION_LENGTH
from gridflare.house.tokens import WORD_INDEX
from gridflare.house.tokens import WORDS


class TaskKind(str, Enum):
    OBJECT_NAV = "objectnav"
    PICKUP = "pickup"
    FETCH = "fetch"
    ROOM_VISIT = "roomvisit"
    OBJ_NAV_REL_ATTR = "objnavrelattr"
    ROOM_NAV = "roomnav"
    OBJ_NAV_AFFORD = "objnavafford"


BASE_TASKS: Tuple[TaskKind, ...] = (TaskKind.OBJECT_NAV, TaskKind.PICKUP, TaskKind.FETCH, TaskKind.ROOM_VISIT)  # noqa:E501
NOVEL_TASKS: Tuple[TaskKind, ...] = (TaskKind.OBJ_NAV_REL_ATTR, TaskKind.ROOM_NAV, TaskKind.OBJ_NAV_AFFORD)  # noqa:E501
SUPERLATIVES: Tuple[str, ...] = ("largest", "smallest")


def parse_task(name) -> TaskKind:
    if isinstance(name, TaskKind):
        return name
    try:
        return TaskKind(str(name).lower())
    except ValueError as error:
        valid = ", ".join(kind.value for kind in TaskKind)
        raise ConfigError(f"unknown task {name!r}, valid tasks: {valid}") from error  # noqa:E501


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    max_steps: int
    # success requires the target inside the window and within this
    # Chebyshev distance
    proximity: int = 2


TASK_SPECS: Dict[TaskKind, TaskSpec] = {
    kind: TaskSpec(kind=kind, max_steps=300 if kind == TaskKind.ROOM_VISIT else 200)  # noqa:E501
    for kind in TaskKind
}

_VERBS: Dict[TaskKind, str] = {
    TaskKind.OBJECT_NAV: "find",
    TaskKind.PICKUP: "pickup",
    TaskKind.FETCH: "fetch",
    TaskKind.ROOM_VISIT: "visit",
    TaskKind.OBJ_NAV_REL_ATTR: "find",
    TaskKind.ROOM_NAV: "goto",
    TaskKind.OBJ_NAV_AFFORD: "find",
}


@dataclass(frozen=True)
class Instruction:
    """Task kind plus target descriptor.

    The descriptor is ``(category,)``, ``(room_type,)``, ``(affordance,)``,
    ``(category, superlative)`` or, for RoomVisit, ``(room_count,)``.
    """

    kind: TaskKind
    target: Tuple[str, ...]

    def __post_init__(self):
        _validate(self.kind, self.target)

    @property
    def words(self) -> Tuple[str, ...]:
        if self.kind == TaskKind.ROOM_VISIT:
            return ("visit", self.target[0], "rooms")
        if self.kind == TaskKind.OBJ_NAV_REL_ATTR:
            return ("find", self.target[1], self.target[0])
        return (_VERBS[self.kind], self.target[0])

    @property
    def text(self) -> str:
        return " ".join(self.words)

    def tokens(self) -> np.ndarray:
        encoded = np.zeros(INSTRUCTION_LENGTH, dtype=np.int64)
        for index, word in enumerate(self.words):
            encoded[index] = WORD_INDEX[word]
        return encoded

    @classmethod
    def from_tokens(cls, tokens) -> "Instruction":
        words = [WORDS[int(token)] for token in tokens if int(token) != 0]
        if words[:1] == ["visit"] and len(words) == 3:
            return cls(TaskKind.ROOM_VISIT, (words[1],))
        if words[:1] == ["find"] and len(words) == 3:
            return cls(TaskKind.OBJ_NAV_REL_ATTR, (words[2], words[1]))
        if words[:1] == ["find"] and len(words) == 2:
            kind = TaskKind.OBJ_NAV_AFFORD if words[1] in AFFORDANCES else TaskKind.OBJECT_NAV  # noqa:E501
            return cls(kind, (words[1],))
        for kind, verb in _VERBS.items():
            if words[:1] == [verb] and len(words) == 2 and verb != "find":
                return cls(kind, (words[1],))
        raise ContractError(f"tokens do not encode an instruction: {words}")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "target": list(self.target)}

    @classmethod
    def from_dict(cls, data: dict) -> "Instruction":
        return cls(parse_task(data["kind"]), tuple(data["target"]))


def _validate(kind: TaskKind, target: Tuple[str, ...]) -> None:
    if kind in (TaskKind.OBJECT_NAV, TaskKind.PICKUP, TaskKind.FETCH):
        ok = len(target) == 1 and target[0] in CATEGORY_INDEX
    elif kind == TaskKind.ROOM_VISIT:
        ok = len(target) == 1 and target[0] in ("2", "3", "4", "5", "6")
    elif kind == TaskKind.OBJ_NAV_REL_ATTR:
        ok = len(target) == 2 and target[0] in CATEGORY_INDEX and target[1] in SUPERLATIVES  # noqa:E501
    elif kind == TaskKind.ROOM_NAV:
        ok = len(target) == 1 and target[0] in ROOM_TYPES
    else:
        ok = len(target) == 1 and target[0] in AFFORDANCES
    if not ok:
        raise ContractError(f"descriptor {target} does not fit task {kind.value}")  # noqa:E501


def extremal_instance(house: House, category_name: str, superlative: str) -> Optional[ObjectInstance]:  # noqa:E501
    """The unique largest or smallest instance of a category, if there is one."""  # noqa:E501
    items = [item for item in house.objects if item.category == category_name]
    if len({item.size_class for item in items}) < 2:
        return None
    pick = max if superlative == "largest" else min
    best = pick(item.size_class for item in items)
    winners = [item for item in items if item.size_class == best]
    return winners[0] if len(winners) == 1 else None


def matches(item: ObjectInstance, instruction: Instruction) -> bool:
    kind = instruction.kind
    if kind == TaskKind.OBJ_NAV_AFFORD:
        return instruction.target[0] in item.tags and (instruction.target[0] != "pickupable" or item.pickupable)  # noqa:E501
    if kind in (TaskKind.OBJECT_NAV, TaskKind.PICKUP, TaskKind.FETCH):
        return item.category == instruction.target[0]
    return False


def valid_targets(kind: TaskKind, house: House) -> List[Tuple[str, ...]]:
    if kind == TaskKind.OBJECT_NAV:
        names = {item.category for item in house.objects}
        return [(name,) for name in sorted(names)]
    if kind in (TaskKind.PICKUP, TaskKind.FETCH):
        names = {item.category for item in house.objects if item.pickupable}
        return [(name,) for name in sorted(names)]
    if kind == TaskKind.ROOM_VISIT:
        return [(str(house.room_count),)]
    if kind == TaskKind.ROOM_NAV:
        return [(name,) for name in sorted(set(house.room_types))]
    if kind == TaskKind.OBJ_NAV_AFFORD:
        tags = {tag for item in house.objects for tag in item.tags if tag != "pickupable" or item.pickupable}  # noqa:E501
        return [(tag,) for tag in AFFORDANCES if tag in tags]
    names = sorted({item.category for item in house.objects})
    return [(name, superlative) for name in names for superlative in SUPERLATIVES
            if extremal_instance(house, name, superlative) is not None]


def sample_instruction(kind, house: House, seed: int) -> Instruction:
    kind = parse_task(kind)
    if not (targets := valid_targets(kind, house)):
        raise UnsatisfiableInstructionError(f"house {house.seed} has no target for {kind.value}")  # noqa:E501
    rng = np.random.default_rng(seed)
    return Instruction(kind, targets[int(rng.integers(len(targets)))])
