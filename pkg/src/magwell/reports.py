"""Deterministic CSV/JSON emission for run artifacts.

Floats are written with 17 significant digits (lossless for float64), field
order is fixed by the caller, and every file embeds the config hash and tool
version, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from contextlib import contextmanager

from . import __version__

__all__ = ["config_hash", "format_float", "write_csv", "write_json",
           "dumps_json", "output_lock", "ReportError"]


class ReportError(RuntimeError):
    pass


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def format_float(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _format_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, complex):
        raise ReportError("split complex values into re/im columns")
    return str(v)


def write_csv(path, fieldnames, rows, meta: dict) -> None:
    """Header-comment metadata line, then fixed-order CSV."""
    lines = ["# " + json.dumps(meta, sort_keys=True, separators=(",", ":"))]
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(_format_cell(row[name]) for name in fieldnames))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def dumps_json(payload) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    return "".join(_emit(payload))


def _emit(obj):
    if obj is None:
        yield "null"
    elif isinstance(obj, bool):
        yield "true" if obj else "false"
    elif isinstance(obj, (int,)):
        yield str(obj)
    elif isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            yield '"' + repr(obj) + '"'
        else:
            yield format_float(obj)
    elif isinstance(obj, complex):
        yield from _emit({"re": obj.real, "im": obj.imag})
    elif isinstance(obj, str):
        yield json.dumps(obj)
    elif isinstance(obj, dict):
        yield "{"
        first = True
        for key in sorted(obj, key=str):
            if not first:
                yield ","
            first = False
            yield json.dumps(str(key)) + ":"
            yield from _emit(obj[key])
        yield "}"
    elif isinstance(obj, (list, tuple)):
        yield "["
        for i, item in enumerate(obj):
            if i:
                yield ","
            yield from _emit(item)
        yield "]"
    elif hasattr(obj, "tolist"):  # numpy scalar or array
        yield from _emit(obj.tolist())
    else:
        raise ReportError(f"cannot serialize {type(obj).__name__}")


def write_json(path, payload, meta: dict) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_json({"meta": meta, "data": payload}) + "\n")


@contextmanager
def output_lock(outdir):
    """One run owns an output directory; concurrent runs must use another."""
    os.makedirs(outdir, exist_ok=True)
    lock = os.path.join(outdir, ".magwell.lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ReportError(
            f"output directory {outdir!r} is locked by another run "
            f"(stale lock? remove {lock})")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        os.unlink(lock)
