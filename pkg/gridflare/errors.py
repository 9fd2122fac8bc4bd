# coding:utf-8

from typing import Optional


class GridFlareError(Exception):
    """Base class of every error raised by gridflare."""


class ConfigError(GridFlareError, ValueError):
    """Invalid or unknown configuration value."""


class ContractError(GridFlareError, ValueError):
    """An operation was called outside its precondition."""


class DimensionError(ContractError):
    def __init__(self, op: str, *shapes):
        self.op: str = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {' and '.join(str(tuple(s)) for s in shapes)}")  # noqa:E501


class NumericError(GridFlareError, ArithmeticError):
    """Non-finite value where a finite one is required."""


class TargetIndexError(GridFlareError, IndexError):
    """Class index or token index out of range."""


class GenerationError(GridFlareError, RuntimeError):
    """The house generator could not satisfy its invariants."""


class UnsatisfiableInstructionError(GridFlareError, LookupError):
    """The house holds no valid target for the requested task."""


class PlannerError(GridFlareError, RuntimeError):
    """The expert planner found no path to the goal."""


class CacheDesyncError(GridFlareError, RuntimeError):
    """Decoder step index does not follow the cache."""


class CheckpointError(GridFlareError, ValueError):
    """Checkpoint file is malformed or does not match the config."""


class DemoYieldError(GridFlareError, RuntimeError):
    """Too many planner failures while generating demonstrations."""


class SchemaError(GridFlareError, KeyError):
    """A table is missing required columns."""


class NonFiniteLossError(GridFlareError, ArithmeticError):
    def __init__(self, message: str, dump: Optional[str] = None):
        self.dump: Optional[str] = dump
        super().__init__(message if dump is None else f"{message} (diagnostics: {dump})")  # noqa:E501
