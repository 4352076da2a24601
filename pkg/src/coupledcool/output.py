"""Deterministic CSV/JSON emission with atomic file replacement.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical files.  Every file carries the fully resolved
parameter set: ``# key = value`` header lines in CSV, a ``params`` object in
JSON.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from .model import SystemParams, params_to_mapping

GENERATOR = "coupledcool"


def params_digest(params: SystemParams) -> str:
    """Short SHA-256 of the canonical parameter mapping."""
    canonical = json.dumps(params_to_mapping(params), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def jsonable(value):
    """Replace complex numbers by {re, im} and non-finite floats by None, recursively."""
    if isinstance(value, complex):
        return {"re": jsonable(value.real), "im": jsonable(value.imag)}
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):  # numpy scalar
        return jsonable(value.item())
    return value


def csv_text(params: SystemParams, columns, rows, settings: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# generator = {GENERATOR}\n")
    buf.write(f"# params_digest = {params_digest(params)}\n")
    for key, value in params_to_mapping(params).items():
        buf.write(f"# {key} = {format_value(float(value))}\n")
    for key, value in (settings or {}).items():
        buf.write(f"# {key} = {format_value(value)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue()


def json_text(params: SystemParams, payload: dict, settings: dict | None = None) -> str:
    document = {
        "generator": GENERATOR,
        "params_digest": params_digest(params),
        "params": params_to_mapping(params),
    }
    if settings:
        document["settings"] = settings
    document.update(payload)
    return json.dumps(jsonable(document), indent=2) + "\n"


def write_atomic(path: str | Path | None, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename; None means stdout."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
