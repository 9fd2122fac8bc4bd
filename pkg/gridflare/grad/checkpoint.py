# coding:utf-8

import struct
from typing import Dict
from typing import Mapping

import numpy as np

from gridflare.errors import CheckpointError

MAGIC = b"FLRB"
VERSION = 1


def dumps(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialize named tensors as little-endian float32 in insertion order."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        array = np.asarray(array)
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(chunks)


class _Reader():

    def __init__(self, payload: bytes):
        self.__payload: bytes = payload
        self.__offset: int = 0

    def take(self, size: int) -> bytes:
        end = self.__offset + size
        if end > len(self.__payload):
            raise CheckpointError("checkpoint truncated")
        chunk = self.__payload[self.__offset:end]
        self.__offset = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def exhausted(self) -> bool:
        return self.__offset == len(self.__payload)


def loads(payload: bytes) -> Dict[str, np.ndarray]:
    reader = _Reader(payload)
    if reader.take(4) != MAGIC:
        raise CheckpointError("not a FLRB checkpoint")
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (length,) = reader.unpack("<I")
        try:
            name = reader.take(length).decode("utf-8")
        except UnicodeDecodeError as error:
            raise CheckpointError(f"tensor name is not utf-8: {error}") from error  # noqa:E501
        (rank,) = reader.unpack("<I")
        shape = reader.unpack(f"<{rank}I")
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(reader.take(4 * size), dtype="<f4")
        if name in tensors:
            raise CheckpointError(f"duplicate tensor {name!r}")
        tensors[name] = data.reshape(shape).astype(np.float32)
    if not reader.exhausted:
        raise CheckpointError("trailing bytes after last tensor")
    return tensors


def save(path: str, tensors: Mapping[str, np.ndarray]) -> None:
    with open(path, "wb") as whdl:
        whdl.write(dumps(tensors))


def load(path: str) -> Dict[str, np.ndarray]:
    try:
        with open(path, "rb") as rhdl:
            return loads(rhdl.read())
    except FileNotFoundError as error:
        raise CheckpointError(f"checkpoint not found: {path}") from error
