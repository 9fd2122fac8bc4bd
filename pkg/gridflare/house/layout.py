# coding:utf-8

from collections import deque
from dataclasses import dataclass
from typing import Iterable
from typing import List
from typing import Optional
from typing import Set
from typing import Tuple

import numpy as np
from loguru import logger

from gridflare.errors import ContractError
from gridflare.errors import GenerationError
from gridflare.house.catalog import CARRY_LIMIT
from gridflare.house.catalog import ROOM_TYPES
from gridflare.house.catalog import categories_for_room

Cell = Tuple[int, int]

MIN_ROOMS = 2
MAX_ROOMS = 6
MAX_RETRIES = 100
# smallest room side; a split needs two rooms plus the wall between them
MIN_SIDE = 3

STEPS: Tuple[Cell, ...] = ((-1, 0), (0, 1), (1, 0), (0, -1))


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    category: str
    size_class: int
    tags: Tuple[str, ...]
    position: Cell

    @property
    def pickupable(self) -> bool:
        return "pickupable" in self.tags and self.size_class <= CARRY_LIMIT

    def to_dict(self) -> dict:
        return {"id": self.id, "category": self.category, "size_class": self.size_class,  # noqa:E501
                "tags": list(self.tags), "position": list(self.position)}


@dataclass(frozen=True, eq=False)
class House:
    """Multi-room grid map.

    ``walls[r, c]`` is True for wall cells, ``rooms[r, c]`` holds the room id
    of a floor cell and -1 for walls. Door cells belong to one of the two
    rooms they join.
    """

    seed: int
    walls: np.ndarray
    rooms: np.ndarray
    room_types: Tuple[str, ...]
    objects: Tuple[ObjectInstance, ...]

    @property
    def height(self) -> int:
        return int(self.walls.shape[0])

    @property
    def width(self) -> int:
        return int(self.walls.shape[1])

    @property
    def room_count(self) -> int:
        return len(self.room_types)

    def inside(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_floor(self, cell: Cell) -> bool:
        return self.inside(cell) and not self.walls[cell]

    def room_of(self, cell: Cell) -> int:
        return int(self.rooms[cell])

    def room_type_at(self, cell: Cell) -> str:
        return self.room_types[self.room_of(cell)]

    def floor_cells(self) -> List[Cell]:
        return [(int(r), int(c)) for r, c in zip(*np.nonzero(~self.walls))]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "walls": self.walls.astype(np.int8).tolist(),
            "rooms": self.rooms.tolist(),
            "room_types": list(self.room_types),
            "objects": [item.to_dict() for item in self.objects],
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, House) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash((self.seed, self.walls.tobytes(), self.room_types))


def flood_fill(start: Cell, passable) -> Set[Cell]:
    seen: Set[Cell] = {start}
    queue = deque([start])
    while queue:
        row, col = queue.popleft()
        for dr, dc in STEPS:
            nxt = (row + dr, col + dc)
            if nxt not in seen and passable(nxt):
                seen.add(nxt)
                queue.append(nxt)
    return seen


def connected(cells: Iterable[Cell], passable) -> bool:
    cells = list(cells)
    return not cells or len(flood_fill(cells[0], passable)) == len(cells)


class _Rect():

    def __init__(self, top: int, left: int, bottom: int, right: int):
        self.top: int = top
        self.left: int = left
        self.bottom: int = bottom
        self.right: int = right

    @property
    def rows(self) -> int:
        return self.bottom - self.top + 1

    @property
    def cols(self) -> int:
        return self.right - self.left + 1

    @property
    def area(self) -> int:
        return self.rows * self.cols


def _split_positions(rect: _Rect, horizontal: bool, doors: List[Cell]) -> List[int]:  # noqa:E501
    low, high = (rect.top, rect.bottom) if horizontal else (rect.left, rect.right)  # noqa:E501
    candidates = list(range(low + MIN_SIDE, high - MIN_SIDE + 1))
    # a wall ending next to an existing door would seal it
    if horizontal:
        blocked = {r for r, c in doors if c in (rect.left - 1, rect.right + 1)}
    else:
        blocked = {c for r, c in doors if r in (rect.top - 1, rect.bottom + 1)}
    return [value for value in candidates if value not in blocked]


def _partition(rng: np.random.Generator, side: int, room_count: int):
    walls = np.ones((side, side), dtype=bool)
    walls[1:side - 1, 1:side - 1] = False
    rects: List[_Rect] = [_Rect(1, 1, side - 2, side - 2)]
    doors: List[Cell] = []
    while len(rects) < room_count:
        choices = []
        for index in sorted(range(len(rects)), key=lambda i: (-rects[i].area, i)):  # noqa:E501
            rect = rects[index]
            for horizontal in (rect.rows >= rect.cols, rect.rows < rect.cols):
                if positions := _split_positions(rect, horizontal, doors):
                    choices.append((index, horizontal, positions))
            if choices:
                break
        if not choices:
            return None
        index, horizontal, positions = choices[0]
        rect = rects[index]
        cut = int(positions[rng.integers(len(positions))])
        if horizontal:
            walls[cut, rect.left:rect.right + 1] = True
            door = (cut, int(rng.integers(rect.left, rect.right + 1)))
            first, second = _Rect(rect.top, rect.left, cut - 1, rect.right), _Rect(cut + 1, rect.left, rect.bottom, rect.right)  # noqa:E501
        else:
            walls[rect.top:rect.bottom + 1, cut] = True
            door = (int(rng.integers(rect.top, rect.bottom + 1)), cut)
            first, second = _Rect(rect.top, rect.left, rect.bottom, cut - 1), _Rect(rect.top, cut + 1, rect.bottom, rect.right)  # noqa:E501
        walls[door] = False
        doors.append(door)
        rects[index] = first
        rects.append(second)
    rooms = np.full((side, side), -1, dtype=np.int64)
    for index, rect in enumerate(rects):
        rooms[rect.top:rect.bottom + 1, rect.left:rect.right + 1] = index
    door_cells = set(doors)
    for row, col in doors:
        # a door joins the room of the lowest id it touches
        rooms[row, col] = min(int(rooms[row + dr, col + dc]) for dr, dc in STEPS
                              if rooms[row + dr, col + dc] >= 0 and (row + dr, col + dc) not in door_cells)  # noqa:E501
    return walls, rooms, doors


def _place_objects(rng: np.random.Generator, walls: np.ndarray, rooms: np.ndarray,  # noqa:E501
                   room_types: Tuple[str, ...], doors: List[Cell]) -> Optional[Tuple[ObjectInstance, ...]]:  # noqa:E501
    near_door: Set[Cell] = set(doors)
    for row, col in doors:
        near_door.update((row + dr, col + dc) for dr, dc in STEPS)
    objects: List[ObjectInstance] = []
    occupied: Set[Cell] = set()
    for room_id, room_type in enumerate(room_types):
        cells = [(int(r), int(c)) for r, c in zip(*np.nonzero(rooms == room_id)) if (r, c) not in near_door]  # noqa:E501
        options = categories_for_room(room_type)
        count = min(int(rng.integers(1, 4)), len(cells) // 4)
        for _ in range(count):
            free = [cell for cell in cells if cell not in occupied]
            cell = free[int(rng.integers(len(free)))]
            kind = options[int(rng.integers(len(options)))]
            size = int(kind.sizes[int(rng.integers(len(kind.sizes)))])
            objects.append(ObjectInstance(id=len(objects), category=kind.name, size_class=size,  # noqa:E501
                                          tags=tuple(sorted(kind.tags)), position=cell))  # noqa:E501
            occupied.add(cell)

    def passable(cell: Cell) -> bool:
        return not walls[cell] and cell not in occupied

    free_cells = [(int(r), int(c)) for r, c in zip(*np.nonzero(~walls)) if (r, c) not in occupied]  # noqa:E501
    if not connected(free_cells, passable):
        return None
    for item in objects:
        if not any(passable((item.position[0] + dr, item.position[1] + dc)) for dr, dc in STEPS):  # noqa:E501
            return None
    if not any(item.pickupable for item in objects):
        return None
    return tuple(objects)


def generate_house(seed: int, room_count: int) -> House:
    """Deterministic procedural house with ``room_count`` rooms.

    Rooms come from recursive rectangle splits with one door per split wall;
    objects are drawn per room type from the catalog. Attempts that break
    connectivity are retried from the same random stream.
    """
    if not MIN_ROOMS <= room_count <= MAX_ROOMS:
        raise ContractError(f"room_count must be in [{MIN_ROOMS}, {MAX_ROOMS}], got {room_count}")  # noqa:E501
    rng = np.random.default_rng(seed)
    side = 7 + 2 * room_count
    for attempt in range(MAX_RETRIES):
        if (parts := _partition(rng, side, room_count)) is None:
            continue
        walls, rooms, doors = parts
        order = rng.permutation(len(ROOM_TYPES))
        types = [ROOM_TYPES[int(i)] for i in order]
        while len(types) < room_count:
            types.append(ROOM_TYPES[int(rng.integers(len(ROOM_TYPES)))])
        room_types = tuple(types[:room_count])
        if (objects := _place_objects(rng, walls, rooms, room_types, doors)) is None:  # noqa:E501
            continue
        if not connected(list(zip(*np.nonzero(~walls))), lambda cell, w=walls: 0 <= cell[0] < side and 0 <= cell[1] < side and not w[cell]):  # noqa:E501
            continue
        if attempt:
            logger.debug("house {} generated after {} retries", seed, attempt)
        return House(seed=int(seed), walls=walls, rooms=rooms, room_types=room_types, objects=objects)  # noqa:E501
    raise GenerationError(f"house {seed}: invariants not met after {MAX_RETRIES} retries")  # noqa:E501
