"""Deterministic JSON/CSV writers and schema-checked readers.

Floats are written with 17 significant digits and Fractions as "p/q" so
that artifacts are byte-stable across runs and thread counts.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import rational as rq
from .errors import MalformedInput


def to_plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and Fractions into JSON-ready values."""
    if isinstance(obj, Fraction):
        return rq.fmt_fraction(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def _emit(obj: Any, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            out.append(json.dumps(str(obj)))
        else:
            out.append(rq.fmt_float(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(k) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                _emit(v, indent, level, out)
                if i + 1 < len(obj):
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(end + "]")
    else:
        out.append(json.dumps(obj))


def dumps_json(obj: Any, indent: int = 2) -> str:
    out: list[str] = []
    _emit(to_plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def write_json(path: Path | str, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def _cell(v: Any) -> str:
    v = to_plain(v)
    if isinstance(v, float):
        return rq.fmt_float(v)
    if isinstance(v, list):
        return " ".join(_cell(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence], meta: Mapping | None = None) -> Path:
    """CSV with an optional leading ``# key=value ...`` comment line (seed, command)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    if meta:
        buf.write("# " + " ".join(f"{k}={_cell(v)}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path: Path | str) -> tuple[dict, list[str], list[list[str]]]:
    """Return (meta, header, rows) for a file written by ``write_csv``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = {}
    if lines and lines[0].startswith("# "):
        for item in lines[0][2:].split():
            k, _, v = item.partition("=")
            meta[k] = v
        lines = lines[1:]
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]


def loads_json(text: str, source: str = "<string>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{source}: {exc.msg}", f"{exc.lineno}:{exc.colno}") from exc


def read_json(path: Path | str) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc.strerror}", str(path)) from exc
    return loads_json(text, str(path))


def require(doc: Mapping, key: str, kind: type | tuple, path: str = "$") -> Any:
    """Fetch ``doc[key]`` checking its type, raising MalformedInput with a JSON path."""
    if not isinstance(doc, Mapping):
        raise MalformedInput("expected an object", path)
    if key not in doc:
        raise MalformedInput(f"missing key {key!r}", path)
    val = doc[key]
    if not isinstance(val, kind):
        raise MalformedInput(f"key {key!r} has the wrong type", f"{path}.{key}")
    return val
