import struct

import numpy as np
import pytest

from lcqhnn.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint
from lcqhnn.errors import BadMagicError, DataError, DataFormatError, TruncatedFileError


@pytest.fixture
def tensors(rng):
    return {
        "conv1.weight": rng.normal(size=(8, 1, 3, 3)),
        "conv1.bias": rng.normal(size=8),
        "vqc.theta": np.array([0.1, np.pi, 1e-300, -2.5]),
    }


def test_round_trip_is_exact(tensors):
    meta = {"head_kind": "lcqhnn", "dataset": "mnist", "epoch": 25, "dropout_rate": 0.5}
    decoded_meta, decoded = decode_checkpoint(encode_checkpoint(tensors, meta))
    assert decoded_meta == meta
    assert set(decoded) == set(tensors)
    for name, value in tensors.items():
        assert decoded[name].shape == value.shape
        np.testing.assert_array_equal(decoded[name], value)


def test_layout_header(tensors):
    data = encode_checkpoint(tensors, {})
    assert data[:8] == MAGIC
    version, meta_len = struct.unpack("<II", data[8:16])
    assert version == 1 and meta_len == 2


def test_bad_magic():
    with pytest.raises(BadMagicError):
        decode_checkpoint(b"NOTACKPT" + b"\x00" * 16)


def test_truncated_and_trailing_bytes(tensors):
    data = encode_checkpoint(tensors, {"epoch": 1})
    with pytest.raises(TruncatedFileError):
        decode_checkpoint(data[:-3])
    with pytest.raises(TruncatedFileError):
        decode_checkpoint(data + b"\x00")


def test_unsupported_version(tensors):
    data = bytearray(encode_checkpoint(tensors, {}))
    data[8:12] = struct.pack("<I", 9)
    with pytest.raises(DataFormatError):
        decode_checkpoint(bytes(data))


def test_write_and_read_file(tmp_path, tensors):
    path = write_checkpoint(tmp_path / "run" / "model.ckpt", tensors, {"epoch": 3})
    meta, decoded = read_checkpoint(path)
    assert meta == {"epoch": 3}
    np.testing.assert_array_equal(decoded["conv1.bias"], tensors["conv1.bias"])
    assert sorted(p.name for p in path.parent.iterdir()) == ["model.ckpt"]


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        read_checkpoint(tmp_path / "absent.ckpt")
