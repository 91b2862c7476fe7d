from collections import OrderedDict

import numpy as np
import pytest

from refineseg.checkpoint import (
    CHECKPOINT_MAGIC,
    CheckpointFormatError,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)


def _params():
    rng = np.random.default_rng(0)
    return OrderedDict(
        [
            ("backbone.enc.0.conv.weight", rng.standard_normal((8, 1, 3, 3)).astype(np.float32)),
            ("backbone.enc.0.conv.bias", np.zeros(8, dtype=np.float32)),
            ("refiner.head.weight", rng.standard_normal((1, 8, 1, 1)).astype(np.float32)),
        ]
    )


def test_round_trip_is_bitwise(tmp_path):
    params = _params()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    back = load_checkpoint(path)
    assert list(back) == list(params)
    for name in params:
        assert back[name].dtype == np.float32
        assert np.array_equal(back[name], params[name])


def test_encoding_is_deterministic():
    assert encode_checkpoint(_params()) == encode_checkpoint(_params())


def test_file_starts_with_magic():
    assert encode_checkpoint(_params()).startswith(CHECKPOINT_MAGIC)


def test_bad_magic_rejected():
    with pytest.raises(CheckpointFormatError, match="at byte 0"):
        decode_checkpoint(b"WRONGMAG1\n" + b"\x00" * 16)


def test_truncated_header_rejected():
    data = encode_checkpoint(_params())
    with pytest.raises(CheckpointFormatError, match="header"):
        decode_checkpoint(data[: len(CHECKPOINT_MAGIC) + 2])


def test_truncated_data_rejected():
    data = encode_checkpoint(_params())
    with pytest.raises(CheckpointFormatError, match="data section"):
        decode_checkpoint(data[:-8])


def test_trailing_garbage_rejected():
    data = encode_checkpoint(_params())
    with pytest.raises(CheckpointFormatError, match="accounts for"):
        decode_checkpoint(data + b"\x00\x00\x00\x00")


def test_non_finite_parameter_rejected():
    params = _params()
    params["refiner.head.weight"][0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        encode_checkpoint(params)


def test_empty_map_rejected():
    with pytest.raises(ValueError, match="empty"):
        encode_checkpoint({})
