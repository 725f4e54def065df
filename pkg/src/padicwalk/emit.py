"""CSV and JSON emission with fixed, locale-free number formatting."""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    """Numbers as '.'-decimal strings; floats keep 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (dict, list)):
        return json.dumps(x, default=float)
    return str(x)


def csv_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return out.getvalue()


def _json_number(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        # JSON has no literal for these; emit them as strings
        return f'"{x}"'
    return format(x, ".17g")


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """A small JSON encoder that writes every float with 17 significant digits.

    Fractions become "num/den" strings, numpy scalars and arrays are unwrapped,
    and dict order is preserved.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _json_number(float(obj))
    if isinstance(obj, Fraction):
        return '"' + str(obj) + '"'
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, range)):
        obj = list(obj)
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _quote(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)
