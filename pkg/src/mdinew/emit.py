"""Deterministic CSV/JSON writers for result records."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def parse_value(s: str):
    if s in ("true", "false"):
        return s == "true"
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def to_csv(records: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([format_value(r[c]) for c in columns])
    return buf.getvalue()


def _json_value(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, float)):
        s = format_value(v)
        return {"nan": "NaN", "inf": "Infinity", "-inf": "-Infinity"}.get(s, s)
    return json.dumps(str(v))


def to_json(records: Sequence[dict], columns: Sequence[str]) -> str:
    rows = ["  {" + ", ".join(f"{json.dumps(c)}: {_json_value(r[c])}" for c in columns) + "}" for r in records]
    return "[\n" + ",\n".join(rows) + ("\n" if rows else "") + "]\n"


def emit(records: Sequence[dict], columns: Sequence[str], fmt: str = "csv", path=None) -> str:
    """Render records and write them to ``path`` when given; returns the text."""
    for r in records:
        if set(r) != set(columns):
            raise ValueError(f"record keys {sorted(r)} differ from columns {list(columns)}")
    if fmt == "csv":
        text = to_csv(records, columns)
    elif fmt == "json":
        text = to_json(records, columns)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        return columns, [dict(zip(columns, (parse_value(v) for v in row))) for row in reader]
