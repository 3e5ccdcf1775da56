"""Serialization of spaces, fields and tabular results.

Space JSON: ``{"label", "a0", "weights": [...], "dist": [...]}`` with ``dist``
flattened row-major; optional ``coords`` (row-major, with ``dim``).
Binary spaces (``.mms``): magic ``MMS1``, then little-endian
``u64 n, f64 a0, u64 label_bytes``, the UTF-8 label, ``n`` f64 weights and
``n * n`` f64 distances row-major.
Field JSON: ``{"values": [...]}`` or a bare list.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .space import Space, SpaceError, build_space

__all__ = [
    "MAGIC",
    "space_to_dict",
    "space_from_dict",
    "save_space",
    "load_space",
    "save_field",
    "load_field",
    "write_csv",
    "format_float",
    "dump_json",
]

MAGIC = b"MMS1"
_HEADER = struct.Struct("<4sQdQ")


def format_float(x) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    return format(float(x), ".17g")


def space_to_dict(space: Space) -> dict:
    out = {
        "label": space.label,
        "a0": space.a0,
        "weights": space.weight.tolist(),
        "dist": space.dist.reshape(-1).tolist(),
    }
    if space.coords is not None:
        out["dim"] = int(space.coords.shape[1])
        out["coords"] = space.coords.reshape(-1).tolist()
    return out


def space_from_dict(data: dict, check: bool = True) -> Space:
    try:
        weights = np.asarray(data["weights"], dtype=float)
        dist = np.asarray(data["dist"], dtype=float)
    except KeyError as exc:
        raise SpaceError(f"space record is missing field {exc.args[0]!r}") from None
    n = weights.shape[0]
    if dist.ndim == 1:
        if dist.shape[0] != n * n:
            raise SpaceError(f"dist has {dist.shape[0]} entries, expected {n * n}")
        dist = dist.reshape(n, n)
    coords = data.get("coords")
    if coords is not None:
        coords = np.asarray(coords, dtype=float).reshape(n, int(data.get("dim", 1)))
    return build_space(dist, weights, float(data.get("a0", 1.0)), str(data.get("label", "")),
                       coords, check=check)


def _save_binary(space: Space, path: Path) -> None:
    label = space.label.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, space.n, space.a0, len(label)))
        fh.write(label)
        fh.write(space.weight.astype("<f8").tobytes())
        fh.write(space.dist.astype("<f8").tobytes())


def _load_binary(path: Path, check: bool) -> Space:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SpaceError(f"{path}: truncated header")
    magic, n, a0, nlabel = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SpaceError(f"{path}: bad magic {magic!r}")
    pos = _HEADER.size
    label = raw[pos:pos + nlabel].decode("utf-8")
    pos += nlabel
    need = pos + 8 * (n + n * n)
    if len(raw) != need:
        raise SpaceError(f"{path}: expected {need} bytes, found {len(raw)}")
    weights = np.frombuffer(raw, "<f8", n, pos).astype(float)
    dist = np.frombuffer(raw, "<f8", n * n, pos + 8 * n).reshape(n, n).astype(float)
    return build_space(dist, weights, a0, label, check=check)


def save_space(space: Space, path) -> Path:
    """Write JSON, or the binary format when the suffix is ``.mms``."""
    path = Path(path)
    if path.suffix == ".mms":
        _save_binary(space, path)
    else:
        dump_json(space_to_dict(space), path)
    return path


def load_space(path, check: bool = True) -> Space:
    """Read a space written by :func:`save_space` (format sniffed by magic)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"space file not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return _load_binary(path, check)
    with open(path, encoding="utf-8") as fh:
        return space_from_dict(json.load(fh), check)


def save_field(values, path) -> Path:
    path = Path(path)
    dump_json({"values": np.asarray(values, dtype=float).tolist()}, path)
    return path


def load_field(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"field file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data["values"]
    return np.asarray(data, dtype=float)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_json(data, path, indent: int = 2) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=indent, default=_jsonable, allow_nan=True)
        fh.write("\n")
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """CSV with floats at 17 significant digits; other cells via ``str``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v
                         for v in row])
    return path
