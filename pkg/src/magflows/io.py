"""Deterministic artifact IO: CSV, JSON, grid blobs, manifests, configs.

All floating output is printed with 17 significant digits ('.' decimal,
'\n' line endings), which round-trips IEEE doubles exactly, so identical
inputs produce byte-identical files on every platform.  Manifests carry
wall-clock times and are the one artifact excluded from byte comparisons.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import sys
import time

import numpy as np

from .errors import ConfigError

GRID_MAGIC = b"MFGRID01"


def format_float(x: float) -> str:
    """17-significant-digit decimal form; exact for round-tripping doubles."""
    x = float(x)
    if x != x:
        return "nan"
    if x == np.inf:
        return "inf"
    if x == -np.inf:
        return "-inf"
    return "%.17g" % x


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def _json_emit(obj, out, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        # non-finite values are not JSON numbers; emit them as tagged strings
        out.append(format_float(x) if np.isfinite(x) else json.dumps(format_float(x)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _json_emit(obj.tolist(), out, indent, level)
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad_in)
            _json_emit(item, out, indent, level + 1)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj, key=str)
        for i, key in enumerate(keys):
            out.append(pad_in + json.dumps(str(key)) + ": ")
            _json_emit(obj[key], out, indent, level + 1)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(pad + "}")
    else:
        raise ConfigError(f"cannot serialize {type(obj).__name__} to JSON")


def json_dumps(obj, indent=2) -> str:
    """JSON text with sorted keys and 17-digit floats."""
    out = []
    _json_emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(json_dumps(obj))


def write_grid(path, values, bbox=(0.0, 1.0, 0.0, 1.0)) -> None:
    """Binary grid blob: magic, int64 shape, float64 bbox, row-major data."""
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 2:
        raise ConfigError("grid blob needs a 2-D array")
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<qq", values.shape[0], values.shape[1]))
        fh.write(struct.pack("<dddd", *[float(b) for b in bbox]))
        fh.write(values.tobytes())


def read_grid(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != GRID_MAGIC:
            raise ConfigError(f"{path}: not a grid blob (bad magic {magic!r})")
        rows, cols = struct.unpack("<qq", fh.read(16))
        bbox = struct.unpack("<dddd", fh.read(32))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).copy(), bbox


def config_hash(config: dict) -> str:
    return hashlib.sha256(json_dumps(config).encode()).hexdigest()


def write_manifest(path, config: dict, started_at: float, extra=None) -> None:
    from . import __version__

    manifest = {
        "config_sha256": config_hash(config),
        "scenario": config.get("scenario"),
        "versions": {
            "magflows": __version__,
            "numpy": np.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
        "wall_time_s": time.time() - started_at,
    }
    try:
        import scipy

        manifest["versions"]["scipy"] = scipy.__version__
    except ImportError:
        pass
    if extra:
        manifest.update(extra)
    write_json(path, manifest)


# ---------------------------------------------------------------------------
# Config files


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config


def validate_keys(config: dict, allowed, required=(), context="config") -> None:
    """Strict schema check: every unknown key is an error, not a warning."""
    for key in config:
        if key not in allowed:
            raise ConfigError(f"unknown {context} key {key!r}")
    for key in required:
        if key not in config:
            raise ConfigError(f"{context} is missing required key {key!r}")


def worker_count(config: dict = None) -> int:
    """Worker knob: config value, else MAGFLOWS_WORKERS, else 1."""
    if config and config.get("workers") is not None:
        value = config["workers"]
    else:
        value = os.environ.get("MAGFLOWS_WORKERS", 1)
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"worker count must be an integer, got {value!r}")
    if n < 1:
        raise ConfigError("worker count must be >= 1")
    return n
