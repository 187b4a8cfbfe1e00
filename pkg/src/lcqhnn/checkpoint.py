"""Binary checkpoint files for model parameters.

Layout (all integers little-endian):

    offset  type            content
    0       8 bytes         magic b"LCQHCKPT"
    8       uint32          format version (1)
    12      uint32          metadata length L
    16      L bytes         UTF-8 JSON object (head_kind, dataset, epoch, dropout_rate, ...)
    16+L    uint32          tensor count T
    then T records:
            uint16          name length K
            K bytes         UTF-8 tensor name
            uint8           ndim D
            D x uint32      dims
            prod(dims) x float64   values, row-major

Values are stored as IEEE-754 doubles, so a save/load round trip is exact.
Trailing bytes after the last record are rejected.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from lcqhnn.errors import BadMagicError, DataError, DataFormatError, TruncatedFileError
from lcqhnn.utils import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"LCQHCKPT"
VERSION = 1


def encode_checkpoint(tensors: Dict[str, np.ndarray], metadata: Dict[str, Any]) -> bytes:
    """Serialize named float tensors plus a metadata object."""
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta, struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype=np.float64)
        encoded_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded_name)))
        parts.append(encoded_name)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"checkpoint truncated at byte {self.pos} (needed {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Parse checkpoint bytes into (metadata, tensors).

    Raises:
        BadMagicError: Wrong magic
        DataFormatError: Unsupported version or corrupt metadata
        TruncatedFileError: Short or over-long data
    """
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise BadMagicError("not a checkpoint file (bad magic)")
    version, meta_len = reader.unpack("<II")
    if version != VERSION:
        raise DataFormatError(f"unsupported checkpoint version {version}")
    try:
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"corrupt checkpoint metadata: {e}") from e
    (count,) = reader.unpack("<I")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(reader.take(8 * size), dtype="<f8").astype(np.float64)
        tensors[name] = values.reshape(shape)
    if reader.pos != len(data):
        raise TruncatedFileError(f"{len(data) - reader.pos} unexpected trailing bytes in checkpoint")
    return metadata, tensors


def write_checkpoint(path: Union[str, Path], tensors: Dict[str, np.ndarray], metadata: Dict[str, Any]) -> Path:
    """Atomically write a checkpoint file."""
    out = atomic_write_bytes(path, encode_checkpoint(tensors, metadata))
    logger.info("wrote checkpoint %s (%d tensors)", out, len(tensors))
    return out


def read_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Read a checkpoint file.

    Raises:
        DataError: If the file does not exist
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"checkpoint not found: {p}")
    return decode_checkpoint(p.read_bytes())
