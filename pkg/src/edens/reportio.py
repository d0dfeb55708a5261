"""Canonical report serialization: byte-deterministic JSON and CSV.

Reports must be byte-identical across runs and machines for a given
(config, seed), so floats are rendered at a fixed 17 significant digits
(enough to round-trip IEEE doubles) and object keys are emitted in
sorted order.  Non-finite floats are refused rather than serialized.
"""

from __future__ import annotations

import hashlib
import json
import math

__all__ = ["canonical_json", "config_digest", "write_report", "write_profile_csv"]


def _emit(obj, parts):
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, str):
        parts.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"refusing to serialize non-finite float {obj!r}")
        parts.append(f"{obj:.17g}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(",")
            _emit(item, parts)
        parts.append("]")
    elif isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"report keys must be strings, got {key!r}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key, ensure_ascii=True))
            parts.append(":")
            _emit(obj[key], parts)
        parts.append("}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} in a report")


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, floats at 17 significant digits."""
    parts = []
    _emit(obj, parts)
    return "".join(parts)


def config_digest(resolved):
    """SHA-256 of the canonicalized, fully-resolved configuration."""
    return hashlib.sha256(canonical_json(resolved).encode("ascii")).hexdigest()


def write_report(report, out_path):
    """Write the canonical JSON report to ``out_path`` (or stdout when None)."""
    text = canonical_json(report) + "\n"
    if out_path is None:
        print(text, end="")
    else:
        with open(out_path, "w", encoding="ascii") as handle:
            handle.write(text)


def write_profile_csv(path, rows):
    """Radial profile rows as CSV: radius, value, std_error, samples, seed."""
    lines = ["radius,value,std_error,samples,seed"]
    for row in rows:
        lines.append(
            f"{row['radius']:.17g},{row['value']:.17g},{row['std_error']:.17g},"
            f"{row['samples']},{row['seed']}"
        )
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")
