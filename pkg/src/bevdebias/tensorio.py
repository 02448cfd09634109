"""Repo-wide tensor file format and PGM image emission.

A tensor is stored as two files: a JSON header and a sibling raw blob.
The header at ``<stem>.json`` holds::

    {"format_version": "1.0", "dtype": "f32", "shape": [...],
     "order": "row-major", "data": "<stem>.bin", "meta": {...}}

and the blob at ``<stem>.bin`` is the values as little-endian float32 in
row-major order. Readers reject any format_version with a major other
than 1. Heatmap previews are written as binary 8-bit PGM (P5), linearly
scaled from [0, max] with max recorded in a sibling JSON file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = "1.0"


class FormatVersionError(ValueError):
    """File written with an unsupported major format version."""


def check_format_version(data: dict, path=None) -> None:
    version = str(data.get("format_version", ""))
    major = version.split(".", 1)[0]
    if major != FORMAT_VERSION.split(".", 1)[0]:
        where = f" in {path}" if path else ""
        raise FormatVersionError(f"unsupported format_version {version!r}{where}")


def save_tensor(path, values: np.ndarray, meta: dict | None = None) -> Path:
    """Write ``values`` as header + blob; returns the header path.

    ``path`` may be given with or without the ``.json`` suffix.
    """
    header_path = Path(path)
    if header_path.suffix != ".json":
        header_path = header_path.with_name(header_path.name + ".json")
    blob_path = header_path.with_suffix(".bin")
    arr = np.ascontiguousarray(values, dtype="<f4")
    header = {
        "format_version": FORMAT_VERSION,
        "dtype": "f32",
        "shape": list(arr.shape),
        "order": "row-major",
        "data": blob_path.name,
        "meta": meta or {},
    }
    header_path.write_text(json.dumps(header, sort_keys=True) + "\n")
    blob_path.write_bytes(arr.tobytes())
    return header_path


def load_tensor(path) -> tuple[np.ndarray, dict]:
    """Read a tensor file pair; returns (float32 array, meta dict)."""
    header_path = Path(path)
    header = json.loads(header_path.read_text())
    check_format_version(header, header_path)
    if header["dtype"] != "f32" or header["order"] != "row-major":
        raise ValueError(f"unsupported tensor layout in {header_path}")
    blob_path = header_path.parent / header["data"]
    arr = np.frombuffer(blob_path.read_bytes(), dtype="<f4")
    return arr.reshape(header["shape"]).copy(), header["meta"]


def write_pgm(path, grid: np.ndarray) -> Path:
    """Write a (W, H) grid as a binary PGM, scaled linearly from [0, max].

    Image columns follow the grid's first axis (u direction) and rows its
    second (v direction). The scale maximum is recorded in ``<path>.json``.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError(f"expected a 2-d grid, got shape {g.shape}")
    peak = float(g.max()) if g.size else 0.0
    if peak > 0:
        scaled = np.clip(g / peak, 0.0, 1.0)
    else:
        scaled = np.zeros_like(g)
    pixels = np.round(scaled * 255.0).astype(np.uint8)
    w, h = pixels.shape
    out = Path(path)
    out.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.T.tobytes())
    sidecar = {"format_version": FORMAT_VERSION, "max": peak, "width": w, "height": h}
    Path(str(out) + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")
    return out


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM back into a (W, H) uint8 grid (for tests)."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(x) for x in parts[1].split())
    data = np.frombuffer(parts[3][: w * h], dtype=np.uint8)
    return data.reshape(h, w).T
