"""Serialization helpers shared by the file formats.

All writers emit floats with 17 significant digits (full double precision,
exact round-trip) and write atomically: content goes to a temporary file in
the target directory which is then renamed over the destination.
"""

import json
import math
import os
import tempfile

import numpy as np

from .errors import ValidationError


def format_float(value):
    """Render a float with 17 significant digits."""
    if not math.isfinite(value):
        raise ValidationError(f"cannot serialize non-finite value {value!r}")
    return format(float(value), ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * level)
    inner = " " * (indent * (level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(inner + s for s in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise ValidationError(f"JSON keys must be strings, got {key!r}")
            items.append(inner + json.dumps(key) + ": "
                         + _encode(value, indent, level + 1))
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise ValidationError(f"cannot serialize object of type {type(obj).__name__}")


def dumps_json(obj, indent=2):
    return _encode(obj, indent, 0) + "\n"


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def dump_json(obj, path, indent=2):
    atomic_write_text(path, dumps_json(obj, indent))


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def write_csv(path, header, columns):
    """Write named columns of floats as CSV, atomically.

    header is a comma-joined string or list of names; columns is a sequence of
    equal-length 1-D arrays, one per name.
    """
    if isinstance(header, str):
        names = header.split(",")
    else:
        names = list(header)
    columns = [np.asarray(c) for c in columns]
    if len(names) != len(columns):
        raise ValidationError("header and column count differ")
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValidationError("columns have unequal lengths")
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(format_float(c[i]) for c in columns))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Read a CSV written by write_csv back into {name: ndarray}."""
    try:
        with open(path) as fh:
            lines = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise ValidationError(f"{path} is empty")
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    if any(len(r) != len(names) for r in rows):
        raise ValidationError(f"{path} has ragged rows")
    data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(names))
    return {name: data[:, j] for j, name in enumerate(names)}
