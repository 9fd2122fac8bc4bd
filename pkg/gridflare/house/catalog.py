# coding:utf-8

from dataclasses import dataclass
from typing import Dict
from typing import FrozenSet
from typing import Tuple

ROOM_TYPES: Tuple[str, ...] = ("kitchen", "bedroom", "living_room", "bathroom", "office")  # noqa:E501
AFFORDANCES: Tuple[str, ...] = ("sittable", "pickupable", "container")

# largest size class that fits the carry slot
CARRY_LIMIT = 2


@dataclass(frozen=True)
class Category:
    name: str
    sizes: Tuple[int, ...]
    tags: FrozenSet[str]
    rooms: Tuple[str, ...]

    @property
    def pickupable(self) -> bool:
        return "pickupable" in self.tags


def _category(name: str, sizes: Tuple[int, ...], tags: Tuple[str, ...], rooms: Tuple[str, ...]) -> Category:  # noqa:E501
    return Category(name=name, sizes=sizes, tags=frozenset(tags), rooms=rooms)


CATEGORIES: Tuple[Category, ...] = (
    _category("apple", (1, 2), ("pickupable",), ("kitchen", "living_room")),
    _category("mug", (1, 2), ("pickupable", "container"), ("kitchen", "office")),  # noqa:E501
    _category("bowl", (1, 2), ("pickupable", "container"), ("kitchen",)),
    _category("book", (1, 2), ("pickupable",), ("bedroom", "living_room", "office")),  # noqa:E501
    _category("vase", (1, 2), ("pickupable", "container"), ("living_room", "bedroom")),  # noqa:E501
    _category("pillow", (1, 2), ("pickupable",), ("bedroom", "living_room")),
    _category("towel", (1,), ("pickupable",), ("bathroom",)),
    _category("soap", (1,), ("pickupable",), ("bathroom",)),
    _category("laptop", (2,), ("pickupable",), ("office", "bedroom")),
    _category("chair", (2, 3), ("sittable",), ("kitchen", "office", "living_room")),  # noqa:E501
    _category("sofa", (3,), ("sittable",), ("living_room",)),
    _category("bed", (3,), ("sittable",), ("bedroom",)),
    _category("stool", (2,), ("sittable",), ("kitchen", "bathroom")),
    _category("toilet", (3,), ("sittable", "container"), ("bathroom",)),
    _category("fridge", (3,), ("container",), ("kitchen",)),
    _category("cabinet", (3,), ("container",), ("office", "bathroom", "bedroom")),  # noqa:E501
)

CATEGORY_INDEX: Dict[str, int] = {item.name: index for index, item in enumerate(CATEGORIES)}  # noqa:E501


def category(name: str) -> Category:
    return CATEGORIES[CATEGORY_INDEX[name]]


def categories_for_room(room_type: str) -> Tuple[Category, ...]:
    return tuple(item for item in CATEGORIES if room_type in item.rooms)
