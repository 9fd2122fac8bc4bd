# coding:utf-8

from dataclasses import dataclass
import json
import os
from typing import Any
from typing import Dict
from typing import Iterable
from typing import Iterator
from typing import List
from typing import Tuple

from gridflare.errors import ContractError
from gridflare.house.tasks import Instruction
from gridflare.house.vector import EpisodeSpec


@dataclass(frozen=True)
class EpisodeRecord:
    """One finished episode as stored in a JSON-lines file."""
    spec: EpisodeSpec
    instruction: Instruction
    actions: Tuple[int, ...]
    rewards: Tuple[float, ...]
    success: bool

    @property
    def length(self) -> int:
        return len(self.actions)

    @property
    def expert_length(self) -> int:
        return int(self.spec.expert_length or 0)

    def to_dict(self) -> Dict[str, Any]:
        data = self.spec.to_dict()
        data.update({"instruction": self.instruction.to_dict(), "actions": list(self.actions),  # noqa:E501
                     "rewards": list(self.rewards), "success": self.success})
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EpisodeRecord":
        try:
            return cls(spec=EpisodeSpec.from_dict(data), instruction=Instruction.from_dict(data["instruction"]),  # noqa:E501
                       actions=tuple(int(a) for a in data["actions"]),
                       rewards=tuple(float(r) for r in data["rewards"]),
                       success=bool(data["success"]))
        except KeyError as error:
            raise ContractError(f"episode record misses field {error}") from error  # noqa:E501


def write_records(path: str, records: Iterable[EpisodeRecord]) -> int:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as whdl:
        for record in records:
            whdl.write(json.dumps(record.to_dict(), sort_keys=True))
            whdl.write("\n")
            count += 1
    return count


def iter_records(path: str) -> Iterator[EpisodeRecord]:
    with open(path, "r", encoding="utf-8") as rhdl:
        for line in rhdl:
            if line := line.strip():
                yield EpisodeRecord.from_dict(json.loads(line))


def read_records(path: str) -> List[EpisodeRecord]:
    return list(iter_records(path))
