"""Series CSV files (header ``t,value``, 1-based t) and model JSON."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .arfima import ArfimaModel
from .gaps import GappySeries

MISSING_TOKENS = {"", "nan", "na", "null"}


def read_series(path) -> GappySeries:
    """Read a ``t,value`` CSV; an empty field or NaN marks a missing value."""
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["t", "value"]:
            raise ValueError(f"{path}: expected header 't,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if int(row[0]) != len(values) + 1:
                raise ValueError(f"{path}:{lineno}: t must run 1, 2, ... in order")
            field = row[1].strip() if len(row) > 1 else ""
            values.append(math.nan if field.lower() in MISSING_TOKENS else float(field))
    return GappySeries.from_nan(np.array(values, dtype=float))


def write_series(path, values) -> None:
    values = values.values if isinstance(values, GappySeries) else np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write("t,value\n")
        for t, v in enumerate(values, start=1):
            fh.write(f"{t},{'NaN' if np.isnan(v) else format(float(v), '.17g')}\n")


def load_model(spec: str) -> ArfimaModel:
    """Model from an inline JSON object or a path to a JSON file."""
    text = spec.strip()
    if not text.startswith("{"):
        text = Path(spec).read_text()
    return ArfimaModel.from_dict(json.loads(text))
