# coding:utf-8

from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from gridflare.errors import ContractError

Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def as_array(data, dtype=None) -> np.ndarray:
    """Float storage for a tensor: float64 stays float64, anything else is float32."""  # noqa:E501
    array = np.asarray(data)
    if dtype is None:
        dtype = np.float64 if array.dtype == np.float64 else np.float32
    return np.ascontiguousarray(array, dtype=dtype)


class Tensor():
    """Dense row-major tensor with an optional gradient accumulator.

    Leaf tensors created with ``requires_grad=True`` own a zero-initialized
    ``grad`` of the same shape. Tensors produced by a recorded operation are
    non-leaf: they take part in backward but never keep a gradient buffer.
    """

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.__data: np.ndarray = as_array(data, dtype)
        self.__requires_grad: bool = bool(requires_grad)
        self.__grad: Optional[np.ndarray] = np.zeros_like(self.__data) if requires_grad else None  # noqa:E501
        self.__tape: Optional["Tape"] = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"  # noqa:E501

    @property
    def data(self) -> np.ndarray:
        return self.__data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.__data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.__data.dtype

    @property
    def size(self) -> int:
        return self.__data.size

    @property
    def ndim(self) -> int:
        return self.__data.ndim

    @property
    def requires_grad(self) -> bool:
        return self.__requires_grad

    @property
    def grad(self) -> Optional[np.ndarray]:
        return self.__grad

    @property
    def tape(self) -> Optional["Tape"]:
        return self.__tape

    @property
    def is_leaf(self) -> bool:
        return self.__tape is None

    def item(self) -> float:
        return float(self.__data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.__data

    def detach(self) -> "Tensor":
        return Tensor(self.__data.copy(), dtype=self.dtype)

    def assign(self, values) -> None:
        """Overwrite the data in place (optimizer steps, checkpoint loads)."""
        values = np.asarray(values)
        if values.shape != self.shape:
            raise ContractError(f"assign: shape {values.shape} does not match {self.shape}")  # noqa:E501
        self.__data[...] = values

    def zero_grad(self) -> None:
        if self.__grad is not None:
            self.__grad.fill(0)

    def scale_grad(self, factor: float) -> None:
        if self.__grad is not None:
            self.__grad *= self.dtype.type(factor)

    def accumulate(self, grad: np.ndarray) -> None:
        if self.__grad is None:
            raise ContractError("accumulate: tensor does not require grad")
        self.__grad += np.asarray(grad, dtype=self.dtype).reshape(self.shape)

    def _attach(self, tape: "Tape") -> None:
        self.__requires_grad = True
        self.__tape = tape

    def __add__(self, other) -> "Tensor":
        from gridflare.grad.ops import add
        return add(self, other)

    def __radd__(self, other) -> "Tensor":
        from gridflare.grad.ops import add
        return add(other, self)

    def __sub__(self, other) -> "Tensor":
        from gridflare.grad.ops import sub
        return sub(self, other)

    def __rsub__(self, other) -> "Tensor":
        from gridflare.grad.ops import sub
        return sub(other, self)

    def __mul__(self, other) -> "Tensor":
        from gridflare.grad.ops import mul
        return mul(self, other)

    def __rmul__(self, other) -> "Tensor":
        from gridflare.grad.ops import mul
        return mul(other, self)

    def __truediv__(self, other: float) -> "Tensor":
        from gridflare.grad.ops import scale
        return scale(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        from gridflare.grad.ops import scale
        return scale(self, -1.0)

    def __matmul__(self, other) -> "Tensor":
        from gridflare.grad.ops import matmul
        return matmul(self, other)


class Record():

    def __init__(self, inputs: Sequence[Tensor], output: Tensor, backward: Backward):  # noqa:E501
        self.__inputs: Tuple[Tensor, ...] = tuple(inputs)
        self.__output: Tensor = output
        self.__backward: Backward = backward

    @property
    def inputs(self) -> Tuple[Tensor, ...]:
        return self.__inputs

    @property
    def output(self) -> Tensor:
        return self.__output

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return self.__backward(grad)


class Tape():
    """Ordered record of differentiable operations.

    Operations are recorded only while a tape is active (``with Tape():``)
    and at least one input requires grad; outside a tape every op is a plain
    numpy computation.
    """

    __active: List["Tape"] = []

    def __init__(self):
        self.__records: List[Record] = []

    def __enter__(self) -> "Tape":
        Tape.__active.append(self)
        return self

    def __exit__(self, *_) -> None:
        Tape.__active.remove(self)

    def __len__(self) -> int:
        return len(self.__records)

    @classmethod
    def current(cls) -> Optional["Tape"]:
        return cls.__active[-1] if cls.__active else None

    @property
    def records(self) -> Tuple[Record, ...]:
        return tuple(self.__records)

    def record(self, inputs: Sequence[Tensor], output: Tensor, backward: Backward) -> None:  # noqa:E501
        output._attach(self)
        self.__records.append(Record(inputs, output, backward))

    def backward(self, loss: Tensor) -> None:
        if loss.tape is not self:
            raise ContractError("backward: loss was recorded on another tape")
        pending: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for record in reversed(self.__records):
            if (grad := pending.pop(id(record.output), None)) is None:
                continue
            for tensor, value in zip(record.inputs, record.backward(grad)):
                if value is None or not tensor.requires_grad:
                    continue
                if tensor.is_leaf:
                    tensor.accumulate(value)
                elif (key := id(tensor)) in pending:
                    pending[key] = pending[key] + value
                else:
                    pending[key] = value


def backward(loss: Tensor) -> None:
    if loss.size != 1:
        raise ContractError(f"backward: loss must be a scalar, got shape {loss.shape}")  # noqa:E501
    if loss.is_leaf:
        if not loss.requires_grad:
            raise ContractError("backward: loss is not on a tape")
        loss.accumulate(np.ones_like(loss.data))
        return
    loss.tape.backward(loss)
