# coding:utf-8

import hashlib
import json
from typing import Dict
from typing import Optional
from typing import Tuple

from gridflare.house.catalog import AFFORDANCES
from gridflare.house.catalog import CATEGORIES
from gridflare.house.catalog import CATEGORY_INDEX
from gridflare.house.catalog import ROOM_TYPES

WINDOW = 7
WINDOW_TOKENS = WINDOW * WINDOW
PROPRIO_TOKENS = 3
INSTRUCTION_LENGTH = 8
OBSERVATION_TOKENS = WINDOW_TOKENS + PROPRIO_TOKENS + INSTRUCTION_LENGTH

# cell tokens: pad, wall, one floor token per room type, then one token per
# (category, size class); affordance bits follow from the category
CELL_PAD = 0
CELL_WALL = 1
CELL_FLOOR = 2
CELL_OBJECT = CELL_FLOOR + len(ROOM_TYPES)
MAX_SIZE_CLASS = 3
CELL_VOCAB = CELL_OBJECT + len(CATEGORIES) * MAX_SIZE_CLASS

# proprioception tokens: arm extension, held category, camera tilt
ARM_LEVELS = 4
PROPRIO_HELD = ARM_LEVELS
PROPRIO_TILT = PROPRIO_HELD + len(CATEGORIES) + 1
PROPRIO_VOCAB = PROPRIO_TILT + 3

WORDS: Tuple[str, ...] = (
    "<pad>", "find", "pickup", "fetch", "visit", "goto", "rooms",
    "largest", "smallest",
    *[item.name for item in CATEGORIES],
    *ROOM_TYPES,
    *AFFORDANCES,
    "2", "3", "4", "5", "6",
)
WORD_INDEX: Dict[str, int] = {word: index for index, word in enumerate(WORDS)}
INSTRUCTION_VOCAB = len(WORDS)


def floor_token(room_type: str) -> int:
    return CELL_FLOOR + ROOM_TYPES.index(room_type)


def object_token(category_name: str, size_class: int) -> int:
    return CELL_OBJECT + CATEGORY_INDEX[category_name] * MAX_SIZE_CLASS + size_class - 1  # noqa:E501


def held_token(category_name: Optional[str]) -> int:
    return PROPRIO_HELD if category_name is None else PROPRIO_HELD + 1 + CATEGORY_INDEX[category_name]  # noqa:E501


def tilt_token(tilt: int) -> int:
    return PROPRIO_TILT + tilt + 1


def vocabulary_hash() -> str:
    """Fingerprint of every token table, stored beside datasets and checkpoints."""  # noqa:E501
    payload = json.dumps({
        "cell": [CELL_VOCAB, list(ROOM_TYPES), [(c.name, c.sizes, sorted(c.tags)) for c in CATEGORIES]],  # noqa:E501
        "proprio": PROPRIO_VOCAB,
        "words": list(WORDS),
        "window": WINDOW,
        "instruction_length": INSTRUCTION_LENGTH,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
