"""Deterministic JSON and CSV writers for instance and result files.

Floats are rendered as decimal with 17 significant digits, which round-trips
IEEE doubles bit-faithfully; dictionaries keep insertion order and no
timestamps or environment data are ever embedded, so identical inputs yield
byte-identical files.
"""

from __future__ import annotations

import math

from .errors import SchemaError


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise SchemaError("number", f"non-finite value {x!r} cannot be serialized")
    if x.is_integer() and abs(x) < 1e15:
        return f"{int(x)}.0"
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Canonical JSON: insertion-ordered keys, 17-significant-digit floats."""
    pad = " " * indent
    child = " " * (indent + 2)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f'{child}{dumps(str(k))}: {dumps(v, indent + 2)}'
                for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        flat = all(isinstance(v, (int, float, str, bool)) or v is None for v in seq)
        if flat:
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        rows = [f"{child}{dumps(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(rows) + f"\n{pad}]"
    raise SchemaError("value", f"cannot serialize {type(obj).__name__}")


def dump_text(obj) -> str:
    return dumps(obj) + "\n"


def write_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append(format_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
