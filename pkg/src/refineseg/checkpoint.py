"""Portable checkpoint files for named parameter maps.

Layout: magic "RSEGCKPT1\\n", a little-endian uint32 byte length, a UTF-8
JSON header mapping parameter names to {"shape": [...], "offset": N}
(offsets into the data section), then the raw little-endian float32
values concatenated in header order.
"""
from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Mapping, TypeAlias

import numpy as np

CHECKPOINT_MAGIC = b"RSEGCKPT1\n"

# A model's full parameter set: unique names in stable order, float arrays.
ModelParams: TypeAlias = "OrderedDict[str, np.ndarray]"


class CheckpointFormatError(ValueError):
    pass


def encode_checkpoint(params: Mapping[str, np.ndarray]) -> bytes:
    if not params:
        raise ValueError("cannot serialize an empty parameter map")
    header: "OrderedDict[str, dict]" = OrderedDict()
    blobs = []
    offset = 0
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        if not np.isfinite(arr).all():
            raise ValueError(f"parameter {name} contains non-finite values")
        header[name] = {"shape": list(arr.shape), "offset": offset}
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header_bytes = json.dumps(header).encode("utf-8")
    return (
        CHECKPOINT_MAGIC
        + struct.pack("<I", len(header_bytes))
        + header_bytes
        + b"".join(blobs)
    )


def decode_checkpoint(data: bytes) -> "OrderedDict[str, np.ndarray]":
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointFormatError(
            f"at byte 0: expected magic {CHECKPOINT_MAGIC!r}, got {bytes(data[:10])!r}"
        )
    pos = len(CHECKPOINT_MAGIC)
    if len(data) < pos + 4:
        raise CheckpointFormatError(f"at byte {pos}: expected uint32 header length")
    (header_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if len(data) < pos + header_len:
        raise CheckpointFormatError(
            f"at byte {pos}: header of {header_len} bytes exceeds file size {len(data)}"
        )
    try:
        header = json.loads(data[pos : pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"at byte {pos}: malformed JSON header: {exc}") from None
    data_start = pos + header_len
    data_len = len(data) - data_start
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()
    expected_end = 0
    for name, entry in header.items():
        shape = tuple(int(v) for v in entry["shape"])
        offset = int(entry["offset"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        if offset != expected_end:
            raise CheckpointFormatError(
                f"parameter {name}: offset {offset} is not contiguous "
                f"(expected {expected_end})"
            )
        if offset + nbytes > data_len:
            raise CheckpointFormatError(
                f"parameter {name}: data section ends at byte {data_len}, "
                f"need {offset + nbytes}"
            )
        count = nbytes // 4
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=data_start + offset)
        params[name] = arr.reshape(shape).copy()
        expected_end = offset + nbytes
    if expected_end != data_len:
        raise CheckpointFormatError(
            f"data section has {data_len} bytes but header accounts for {expected_end}"
        )
    return params


def save_checkpoint(path, params: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(encode_checkpoint(params))


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    return decode_checkpoint(Path(path).read_bytes())
