"""JSON text with every float written to 17 significant digits.

``json.dumps`` writes the shortest repr, which also round-trips, but fixed
17-digit output keeps report bytes independent of the Python version.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .outcomes import Pmf


def fmt_float(v: float) -> str:
    """17 significant digits; non-finite values become JSON strings."""
    v = float(v)
    if not math.isfinite(v):
        return json.dumps(repr(v))
    s = format(v, ".17g")
    # keep the value visibly a float when it happens to be integral
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def to_plain(obj: Any) -> Any:
    """Tuples to lists, Pmfs to weight lists, numpy scalars to Python."""
    if isinstance(obj, Pmf):
        return [float(w) for w in obj.weights]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def dumps(obj: Any, indent: int = 1) -> str:
    """Deterministic JSON: sorted keys, fixed float format, trailing newline."""
    return _encode(to_plain(obj), 0, indent) + "\n"


def _encode(obj: Any, depth: int, indent: int) -> str:
    pad = "\n" + " " * (indent * (depth + 1))
    end = "\n" + " " * (indent * depth)
    if obj is None or isinstance(obj, (bool, str, int)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(k)}: {_encode(obj[k], depth + 1, indent)}" for k in sorted(obj)]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [_encode(v, depth + 1, indent) for v in obj]
        return "[" + pad + ("," + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
