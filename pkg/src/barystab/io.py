"""Deterministic text serialization: JSON and CSV with 17 significant digits."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def format_real(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        # JSON has no literal for these; CSV readers accept the strings
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return f"{x:.17g}"


def dumps(obj: Any, indent: int | None = None) -> str:
    """JSON text with every real written at 17 significant digits.

    Dict key order is preserved, so callers control field order.
    """
    return _dump(obj, indent, 0)


def _dump(obj, indent, level):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return "null"
        return format_real(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        items = [f"{json.dumps(str(k))}:{_sep(indent)}{_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return _wrap("{", "}", items, indent, level)
    if isinstance(obj, (list, tuple)):
        items = [_dump(v, indent, level + 1) for v in obj]
        return _wrap("[", "]", items, indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sep(indent):
    return "" if indent is None else " "


def _wrap(open_, close, items, indent, level):
    if not items:
        return open_ + close
    if indent is None:
        return open_ + ",".join(items) + close
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    return open_ + "\n" + ",\n".join(pad + it for it in items) + "\n" + end + close


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(dumps(obj, indent=2) + "\n", encoding="utf-8")
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """RFC-4180 CSV with ``\\n`` line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_real(v)
    return v


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]
