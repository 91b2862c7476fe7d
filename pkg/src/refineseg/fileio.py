"""File formats: float/binary rasters, 8-bit PGM interchange, slice-stack volumes.

Float raster: magic "RSEGIMG1\\n", an ASCII header line "H W\\n", then
H*W little-endian float32 values row-major. Binary masks use magic
"RSEGMSK1\\n" with one byte per pixel valued 0 or 1. Volumes are
directories of slice files named slice_0000.img / slice_0000.msk upward.
"""
from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np

IMAGE_MAGIC = b"RSEGIMG1\n"
MASK_MAGIC = b"RSEGMSK1\n"
PGM_MAGIC = b"P5"

IMAGE_SLICE_PATTERN = re.compile(r"^slice_(\d{4})\.img$")
MASK_SLICE_PATTERN = re.compile(r"^slice_(\d{4})\.msk$")


class RasterFormatError(ValueError):
    """Raised for malformed raster payloads, naming offset and expectation."""


def _parse_dims(data: bytes, offset: int) -> tuple[int, int, int]:
    end = data.find(b"\n", offset)
    if end < 0:
        raise RasterFormatError(
            f"at byte {offset}: expected ASCII header line 'H W' terminated by newline"
        )
    try:
        fields = data[offset:end].decode("ascii").split()
        h, w = (int(v) for v in fields)
    except Exception:
        raise RasterFormatError(
            f"at byte {offset}: expected two ASCII integers 'H W', got {data[offset:end]!r}"
        ) from None
    if h < 1 or w < 1:
        raise RasterFormatError(f"at byte {offset}: dimensions must be positive, got {h}x{w}")
    return h, w, end + 1


def encode_raster(arr: np.ndarray) -> bytes:
    """Serialize a 2D array; float dtypes become images, bool/0-1 become masks."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"raster must be 2D, got shape {arr.shape}")
    h, w = arr.shape
    header = f"{h} {w}\n".encode("ascii")
    if arr.dtype == bool or np.issubdtype(arr.dtype, np.integer):
        payload = arr.astype(bool).astype(np.uint8).tobytes()
        return MASK_MAGIC + header + payload
    payload = arr.astype("<f4").tobytes()
    return IMAGE_MAGIC + header + payload


def decode_raster(data: bytes) -> np.ndarray:
    """Parse raster bytes to a float32 image or bool mask, by magic."""
    if data.startswith(IMAGE_MAGIC):
        h, w, off = _parse_dims(data, len(IMAGE_MAGIC))
        expect = h * w * 4
        if len(data) - off != expect:
            raise RasterFormatError(
                f"at byte {off}: expected {expect} payload bytes for {h}x{w} float32, "
                f"got {len(data) - off}"
            )
        values = np.frombuffer(data, dtype="<f4", count=h * w, offset=off)
        return values.reshape(h, w).copy()
    if data.startswith(MASK_MAGIC):
        h, w, off = _parse_dims(data, len(MASK_MAGIC))
        expect = h * w
        if len(data) - off != expect:
            raise RasterFormatError(
                f"at byte {off}: expected {expect} payload bytes for {h}x{w} mask, "
                f"got {len(data) - off}"
            )
        values = np.frombuffer(data, dtype=np.uint8, count=expect, offset=off)
        bad = np.nonzero(values > 1)[0]
        if bad.size:
            raise RasterFormatError(
                f"at byte {off + int(bad[0])}: expected mask byte 0 or 1, "
                f"got {int(values[bad[0]])}"
            )
        return values.reshape(h, w).astype(bool)
    raise RasterFormatError(
        f"at byte 0: expected magic {IMAGE_MAGIC!r} or {MASK_MAGIC!r}, "
        f"got {bytes(data[:9])!r}"
    )


def write_raster(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_raster(arr))


def read_raster(path) -> np.ndarray:
    return decode_raster(Path(path).read_bytes())


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse an 8-bit binary PGM (P5) into a float32 image in [0, 1]."""
    if not data.startswith(PGM_MAGIC):
        raise RasterFormatError(f"at byte 0: expected PGM magic b'P5', got {bytes(data[:2])!r}")
    # Header tokens (width, height, maxval) with '#' comments allowed.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise RasterFormatError(f"at byte {start}: expected PGM header token")
        tokens.append(data[start:pos])
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise RasterFormatError(f"at byte 2: malformed PGM header tokens {tokens!r}") from None
    if maxval < 1 or maxval > 255:
        raise RasterFormatError(f"only 8-bit PGM supported, got maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    expect = w * h
    if len(data) - pos != expect:
        raise RasterFormatError(
            f"at byte {pos}: expected {expect} payload bytes for {h}x{w} PGM, "
            f"got {len(data) - pos}"
        )
    values = np.frombuffer(data, dtype=np.uint8, count=expect, offset=pos)
    return (values.reshape(h, w).astype(np.float32)) / float(maxval)


def encode_pgm(arr: np.ndarray) -> bytes:
    """Serialize an image (float in [0, 1]) or mask to 8-bit binary PGM."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"PGM raster must be 2D, got shape {arr.shape}")
    if arr.dtype == bool or np.issubdtype(arr.dtype, np.integer):
        payload = arr.astype(bool).astype(np.uint8) * 255
    else:
        payload = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = arr.shape
    return b"P5\n" + f"{w} {h}\n255\n".encode("ascii") + payload.tobytes()


def write_pgm(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(arr))


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def write_volume(dirpath, volume: np.ndarray) -> None:
    """Write a slice stack as slice_0000.img/.msk files in a directory."""
    volume = np.asarray(volume)
    if volume.ndim != 3:
        raise ValueError(f"volume must be 3D, got shape {volume.shape}")
    ext = "msk" if volume.dtype == bool or np.issubdtype(volume.dtype, np.integer) else "img"
    path = Path(dirpath)
    path.mkdir(parents=True, exist_ok=True)
    for i in range(volume.shape[0]):
        write_raster(path / f"slice_{i:04d}.{ext}", volume[i])


def read_volume(dirpath) -> np.ndarray:
    """Read a slice-stack directory; slice numbering must be gap-free from 0."""
    path = Path(dirpath)
    if not path.is_dir():
        raise FileNotFoundError(f"volume directory not found: {path}")
    indices: dict[int, Path] = {}
    for entry in os.listdir(path):
        m = IMAGE_SLICE_PATTERN.match(entry) or MASK_SLICE_PATTERN.match(entry)
        if m:
            indices[int(m.group(1))] = path / entry
    if not indices:
        raise RasterFormatError(f"no slice_NNNN.img/.msk files in {path}")
    count = max(indices) + 1
    missing = sorted(set(range(count)) - set(indices))
    if missing:
        raise RasterFormatError(
            f"volume {path} has gaps in slice numbering, missing indices {missing}"
        )
    slices = [read_raster(indices[i]) for i in range(count)]
    shapes = {s.shape for s in slices}
    if len(shapes) != 1:
        raise RasterFormatError(f"volume {path} slices disagree in shape: {sorted(shapes)}")
    return np.stack(slices, axis=0)
