"""Flat little-endian weight tensors with an optional ``key: value`` manifest.

The manifest lives next to the payload as ``<payload>.manifest``::

    name: conv1.weight
    count: 1728
    shape: 64,3,3,3

Unknown keys are ignored.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .codec import DomainError
from .halffloat import reals_to_halves

FORMATS = {"f16le": "<u2", "f32le": "<f4"}


class WeightFileError(ValueError):
    pass


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest")


def read_manifest(path) -> dict:
    meta = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition(":")
        if not sep:
            raise WeightFileError(f"{path}:{lineno}: expected 'key: value'")
        key, val = key.strip(), val.strip()
        try:
            if key == "count":
                meta["count"] = int(val)
            elif key == "shape":
                meta["shape"] = tuple(int(d) for d in val.replace("x", ",").split(",") if d.strip())
            elif key == "name":
                meta["name"] = val
        except ValueError:
            raise WeightFileError(f"{path}:{lineno}: bad {key} {val!r}") from None
    return meta


def write_manifest(path, count: int, name: str | None = None, shape=None):
    lines = []
    if name:
        lines.append(f"name: {name}")
    lines.append(f"count: {count}")
    if shape:
        lines.append("shape: " + ",".join(str(d) for d in shape))
    manifest_path(path).write_text("\n".join(lines) + "\n")


def read_weights(path, fmt: str = "f16le") -> np.ndarray:
    """Load a weight file as half words (``f32le`` is rounded to half)."""
    if fmt not in FORMATS:
        raise WeightFileError(f"unknown format {fmt!r}; expected one of {sorted(FORMATS)}")
    data = Path(path).read_bytes()
    dtype = np.dtype(FORMATS[fmt])
    if len(data) % dtype.itemsize:
        raise WeightFileError(f"{path}: {len(data)} bytes is not a multiple of {dtype.itemsize}")
    values = np.frombuffer(data, dtype)

    mpath = manifest_path(path)
    if mpath.exists():
        meta = read_manifest(mpath)
        if "count" in meta and meta["count"] != len(values):
            raise WeightFileError(f"{mpath}: count {meta['count']} but payload holds {len(values)}")
        if "shape" in meta and math.prod(meta["shape"]) != len(values):
            raise WeightFileError(f"{mpath}: shape {meta['shape']} does not match {len(values)} elements")

    if fmt == "f16le":
        return values.astype(np.uint16)
    try:
        return reals_to_halves(values.astype(np.float64))
    except (ValueError, OverflowError) as exc:
        raise DomainError(f"{path}: {exc}") from None


def write_weights(path, words, fmt: str = "f16le"):
    words = np.asarray(words, dtype=np.uint16)
    if fmt == "f16le":
        payload = words.astype("<u2").tobytes()
    elif fmt == "f32le":
        payload = words.view(np.float16).astype("<f4").tobytes()
    else:
        raise WeightFileError(f"unknown format {fmt!r}")
    Path(path).write_bytes(payload)
