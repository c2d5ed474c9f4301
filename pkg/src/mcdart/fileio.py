"""On-disk formats: PGM label images, spectra CSV, raw float64 sinograms.

Raw arrays are little-endian float64, row-major ``height x width`` (angles x
detector bins for sinograms), described by a JSON sidecar ``<name>.json``
next to ``<name>.raw``.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .projector import GridSpec, ParallelGeometry
from .segmentation import MaterialSpectra


class FileFormatError(ValueError):
    """Malformed input file; ``offset`` is the byte position of the problem."""

    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


# -- PGM ---------------------------------------------------------------------

def write_pgm(path, labels, width: int, height: int) -> None:
    labels = np.asarray(labels).ravel()
    if labels.size != width * height:
        raise ValueError(f"{labels.size} labels do not fill a {width}x{height} image")
    if labels.size and (labels.min() < 0 or labels.max() > 255):
        raise ValueError("labels must fit in 8 bits")
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(labels.astype(np.uint8).tobytes())


def read_pgm(path) -> tuple[np.ndarray, int, int]:
    """Returns ``(labels, width, height)`` from an 8-bit binary PGM."""
    data = Path(path).read_bytes()
    pos = 0
    fields = []

    def skip_space_and_comments(pos):
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        return pos

    if data[:2] != b"P5":
        raise FileFormatError(path, 0, "not a binary PGM (missing P5 magic)")
    pos = 2
    for name in ("width", "height", "maxval"):
        pos = skip_space_and_comments(pos)
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise FileFormatError(path, start, f"expected integer {name}")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FileFormatError(path, pos, "expected single whitespace after header")
    pos += 1
    width, height, maxval = fields
    if maxval > 255 or maxval < 1:
        raise FileFormatError(path, pos - 1, f"only 8-bit PGM supported, maxval {maxval}")
    expected = width * height
    if len(data) - pos < expected:
        raise FileFormatError(path, len(data), f"pixel data truncated: need {expected} bytes from offset {pos}")
    labels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=pos).astype(np.intp)
    return labels, width, height


# -- spectra CSV -------------------------------------------------------------

def write_spectra_csv(path, spectra: MaterialSpectra) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("label,channel,mu\n")
        for s in range(spectra.m + 1):
            for c in range(spectra.channels):
                f.write(f"{s},{c},{float(spectra.table[s, c])!r}\n")


def read_spectra_csv(path) -> MaterialSpectra:
    """Parse ``label,channel,mu`` rows; channels are 0-based, label 0 optional."""
    raw = Path(path).read_bytes()
    entries = {}
    offset = 0
    lines = raw.splitlines(keepends=True)
    if not lines or lines[0].strip().replace(b" ", b"") != b"label,channel,mu":
        raise FileFormatError(path, 0, "expected header 'label,channel,mu'")
    offset = len(lines[0])
    for line in lines[1:]:
        text = line.strip()
        if text and not text.startswith(b"#"):
            parts = text.split(b",")
            try:
                if len(parts) != 3:
                    raise ValueError
                s, c, mu = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise FileFormatError(path, offset, f"malformed row {text.decode(errors='replace')!r}") from None
            if s < 0 or c < 0:
                raise FileFormatError(path, offset, "label and channel must be non-negative")
            if (s, c) in entries:
                raise FileFormatError(path, offset, f"duplicate entry for label {s}, channel {c}")
            entries[(s, c)] = (mu, offset)
        offset += len(line)
    if not entries:
        raise FileFormatError(path, offset, "no spectra rows")
    m = max(s for s, _ in entries)
    C = max(c for _, c in entries) + 1
    table = np.zeros((m + 1, C))
    for s in range(0, m + 1):
        for c in range(C):
            if (s, c) in entries:
                table[s, c] = entries[(s, c)][0]
            elif s != 0:
                raise FileFormatError(path, offset, f"missing entry for label {s}, channel {c}")
    try:
        return MaterialSpectra(table)
    except ValueError as e:
        bad = next((o for (s, c), (mu, o) in entries.items() if mu < 0 or (s == 0 and mu != 0)
                    or not np.isfinite(mu)), 0)
        raise FileFormatError(path, bad, str(e)) from None


# -- raw float64 arrays with JSON sidecar ------------------------------------

def _sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def geometry_header(grid: GridSpec, geometry: ParallelGeometry) -> dict:
    return {
        "grid": {"width": grid.width, "height": grid.height, "pixel_size": grid.pixel_size},
        "geometry": {
            "angles": list(geometry.angles),
            "detector_bins": geometry.detector_bins,
            "detector_pixel_size": geometry.detector_pixel_size,
            "detector_offset": geometry.detector_offset,
        },
    }


def header_geometry(header: dict) -> tuple[GridSpec, ParallelGeometry]:
    g, geo = header["grid"], header["geometry"]
    return (GridSpec(int(g["width"]), int(g["height"]), float(g.get("pixel_size", 1.0))),
            ParallelGeometry(tuple(geo["angles"]), int(geo["detector_bins"]),
                             float(geo.get("detector_pixel_size", 1.0)), float(geo.get("detector_offset", 0.0))))


def write_raw(path, array, width: int, height: int, **header) -> None:
    array = np.ascontiguousarray(array, dtype="<f8").ravel()
    if array.size != width * height:
        raise ValueError(f"{array.size} values do not fill {width}x{height}")
    Path(path).write_bytes(array.tobytes())
    meta = {"dtype": "float64", "byte_order": "little", "width": width, "height": height, **header}
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_raw(path) -> tuple[np.ndarray, dict]:
    """Returns the flat array and its sidecar header."""
    path = Path(path)
    if path.suffix == ".json":
        path = path.with_suffix(".raw")
    side = _sidecar(path)
    try:
        text = side.read_text()
        meta = json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(side, len(text[:e.pos].encode()), f"invalid JSON: {e.msg}") from None
    for key in ("width", "height"):
        if not isinstance(meta.get(key), int) or meta[key] < 1:
            raise FileFormatError(side, 0, f"sidecar lacks a positive integer '{key}'")
    if meta.get("dtype", "float64") != "float64" or meta.get("byte_order", "little") != "little":
        raise FileFormatError(side, 0, "only little-endian float64 data is supported")
    data = path.read_bytes()
    expected = meta["width"] * meta["height"] * 8
    if len(data) != expected:
        offset = min(len(data), expected) - (min(len(data), expected) % 8)
        raise FileFormatError(path, offset, f"expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f8").astype(np.float64), meta


def write_sinogram(path, sinogram, grid: GridSpec, geometry: ParallelGeometry, channel: int) -> None:
    write_raw(path, sinogram, geometry.detector_bins, geometry.n_angles, channel=channel,
              **geometry_header(grid, geometry))


def read_sinogram(path) -> tuple[np.ndarray, dict]:
    data, meta = read_raw(path)
    if "geometry" in meta:
        geo = meta["geometry"]
        if geo.get("detector_bins") != meta["width"] or len(geo.get("angles", ())) != meta["height"]:
            raise FileFormatError(_sidecar(path), 0, "width/height disagree with the stored geometry")
    return data, meta


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
