"""Deterministic JSON writing: floats carry 17 significant digits so that
serialized reports are byte-comparable across runs and round-trip exactly."""

from __future__ import annotations

import json
import math


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite numbers cannot be serialized")
    if x == int(x) and abs(x) < 1e16:
        return format(x, ".1f")
    return format(x, ".17g")


def _encode(obj, parts: list, indent: int) -> None:
    pad = " " * indent
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(_format_float(obj))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (key, val) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {type(key)}")
            parts.append(pad + "  " + json.dumps(key) + ": ")
            _encode(val, parts, indent + 2)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            parts.append("[]")
            return
        parts.append("[\n")
        for i, val in enumerate(obj):
            parts.append(pad + "  ")
            _encode(val, parts, indent + 2)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize object of type {type(obj)}")


def dumps_json(obj) -> str:
    parts: list = []
    _encode(obj, parts, 0)
    parts.append("\n")
    return "".join(parts)


def dump_json(obj, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_json(obj))


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
