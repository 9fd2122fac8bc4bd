# coding:utf-8

import os
from typing import Any
from typing import Dict
from typing import Sequence

import pandas as pd

from gridflare.errors import SchemaError


def append_row(path: str, columns: Sequence[str], row: Dict[str, Any]) -> None:  # noqa:E501
    """Append one row, writing the header when the file is new."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame = pd.DataFrame([{column: row.get(column) for column in columns}], columns=list(columns))  # noqa:E501
    frame.to_csv(path, mode="a", header=not os.path.isfile(path), index=False)


def read_table(path: str, required: Sequence[str] = ()) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise SchemaError(f"table {path} not found")
    frame = pd.read_csv(path)
    if missing := [column for column in required if column not in frame.columns]:  # noqa:E501
        raise SchemaError(f"{path} lacks columns {', '.join(missing)}")
    return frame


def write_table(path: str, frame: pd.DataFrame) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False)


def markdown_table(frame: pd.DataFrame, digits: int = 3) -> str:
    def cell(value) -> str:
        if isinstance(value, float):
            return "-" if pd.isna(value) else f"{value:.{digits}f}"
        return str(value)

    header = "| " + " | ".join(str(column) for column in frame.columns) + " |"  # noqa:E501
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    rows = ["| " + " | ".join(cell(value) for value in record) + " |"
            for record in frame.itertuples(index=False, name=None)]
    return "\n".join([header, rule, *rows]) + "\n"
