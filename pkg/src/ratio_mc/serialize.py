"""Deterministic artifact serialization.

All JSON is written with sorted keys and shortest round-trip float
decimals; all CSV floats use 17 significant digits.  Rerunning a pipeline
with the same config therefore reproduces every artifact byte for byte.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import ParseError

FLOAT_FMT = "%.17g"


def jsonable(obj):
    """Recursively convert numpy containers/scalars to plain Python."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":")).encode()


def config_sha256(obj) -> str:
    return hashlib.sha256(canonical_json_bytes(obj)).hexdigest()


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in {path}: {exc}", line=exc.lineno) from exc


def write_points_csv(path, points, columns=None) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if columns is None:
        columns = [f"x{i}" for i in range(pts.shape[1])]
    lines = [",".join(columns)]
    for row in pts:
        lines.append(",".join(FLOAT_FMT % v for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_points_csv(path) -> np.ndarray:
    with open(path, "r") as fh:
        header = fh.readline().rstrip("\n").split(",")
        dim = len(header)
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != dim:
                raise ParseError(f"expected {dim} fields, got {len(fields)}", line=lineno)
            try:
                rows.append([float(v) for v in fields])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return np.asarray(rows, dtype=np.float64).reshape(-1, dim)
