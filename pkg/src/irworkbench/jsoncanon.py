"""Canonical JSON serialization.

One serialization is used everywhere bytes must be reproducible: session
exports, on-disk session files, analysis parameter digests, and the data
blob embedded in HTML reports. Rules: object keys sorted, compact
separators, ASCII-only escapes, floats rendered with 17 significant digits
(always enough to round-trip an IEEE-754 double).
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any


def format_float(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"non-finite float not representable in canonical JSON: {value!r}")
    return "%.17g" % value


def _write(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"canonical JSON object keys must be str, got {type(key).__name__}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _write(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    else:
        raise TypeError(f"type {type(obj).__name__} not representable in canonical JSON")


def dumps(obj: Any) -> str:
    out: list[str] = []
    _write(obj, out)
    return "".join(out)


def dump_bytes(obj: Any) -> bytes:
    return dumps(obj).encode("ascii")


def digest(obj: Any) -> str:
    """SHA-256 hex digest of the canonical serialization."""
    return hashlib.sha256(dump_bytes(obj)).hexdigest()


def digest_bytes(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()
