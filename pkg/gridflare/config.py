# coding:utf-8

from dataclasses import asdict
from dataclasses import fields
import json
import os
from typing import Any
from typing import Dict
from typing import Optional
from typing import Type
from typing import TypeVar

import yaml

from gridflare.errors import ConfigError

T = TypeVar("T", bound="ConfigMixin")


class ConfigMixin:
    """Dict conversion shared by the dataclass configs.

    Tuples survive a JSON or YAML trip as lists and are converted back from
    the field's default value.
    """

    def to_dict(self) -> Dict[str, Any]:
        return _plain(asdict(self))  # type: ignore[call-overload]

    @classmethod
    def from_dict(cls: Type[T], data: Optional[Dict[str, Any]] = None) -> T:
        data = dict(data or {})
        known = {item.name: item for item in fields(cls)}  # type: ignore[arg-type]  # noqa:E501
        if unknown := sorted(set(data) - set(known)):
            raise ConfigError(f"{cls.__name__}: unknown keys {', '.join(unknown)}")  # noqa:E501
        default = cls()
        values: Dict[str, Any] = {}
        for name, value in data.items():
            current = getattr(default, name)
            if isinstance(current, tuple) and isinstance(value, list):
                value = tuple(value)
            values[name] = value
        return cls(**values)

    def replace(self: T, **changes) -> T:
        merged = self.to_dict()
        merged.update(changes)
        return type(self).from_dict(merged)


def _plain(value):
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def load_yaml(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path} not found")
    with open(path, "r", encoding="utf-8") as rhdl:
        try:
            data = yaml.safe_load(rhdl)
        except yaml.YAMLError as error:
            raise ConfigError(f"config file {path}: {error}") from error
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return data


def section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return value


def overlay(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Layer CLI values over file values; None means the flag was not given."""  # noqa:E501
    merged = dict(base)
    merged.update({key: value for key, value in overrides.items() if value is not None})  # noqa:E501
    return merged


def write_json(path: str, data: Dict[str, Any]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as whdl:
        json.dump(data, whdl, indent=2, sort_keys=True)
        whdl.write("\n")


def read_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as rhdl:
        return json.load(rhdl)
