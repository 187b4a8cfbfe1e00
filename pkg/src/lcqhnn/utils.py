"""Utility functions for atomic file output, seeded random streams and logging setup.
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Union

import numpy as np

from lcqhnn.errors import DataError

# Independent random streams derived from one run seed.
STREAM_INIT = 0
STREAM_SPLIT = 1
STREAM_SHUFFLE = 2
STREAM_DROPOUT = 3
STREAM_SWEEP = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """Create a generator for one named stream of a run seed.

    Streams are independent of each other, so e.g. changing the dropout rate
    never changes the split or the initialization drawn from the same seed.

    Args:
        seed: Run seed
        stream: One of the STREAM_* constants

    Returns:
        A fresh numpy Generator
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def atomic_write_bytes(path: Union[str, Path], data: bytes) -> Path:
    """Write bytes to path via a temporary file in the same directory and a rename.

    Readers never observe a partially written file.

    Args:
        path: Destination file
        data: File content

    Returns:
        The destination path

    Raises:
        DataError: If the directory cannot be created or the file cannot be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException as e:
        # Remove the orphaned temp file, then re-raise
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        if isinstance(e, OSError):
            raise DataError(f"cannot write {path}: {e}") from e
        raise
    return path


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Text variant of atomic_write_bytes (UTF-8, newlines untranslated)."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def configure_logging(verbosity: int = 0) -> None:
    """Install a single stream handler on the root logger.

    Args:
        verbosity: -1 quiet (warnings only), 0 info, >= 1 debug
    """
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
