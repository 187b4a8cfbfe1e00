"""Exception hierarchy shared by the library and the command line.

Every exception carries the process exit code the CLI reports for it:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""


class LcqhnnError(Exception):
    """Root of all errors raised by this package."""
    exit_code = 1


class UsageError(LcqhnnError):
    """Invalid flag, config value, or unsupported request."""
    exit_code = 1


class ShapeError(LcqhnnError, ValueError):
    """Tensor shape or dimension mismatch."""
    exit_code = 1


class QubitIndexError(LcqhnnError, IndexError):
    """Wire index out of range, or a register size outside the simulator bound."""
    exit_code = 1


class StaleCacheError(LcqhnnError):
    """A backward pass was given a forward cache that no longer matches the parameters."""
    exit_code = 1


class DataError(LcqhnnError):
    """Missing or unusable input data."""
    exit_code = 2


class DataFormatError(DataError, ValueError):
    """A data or checkpoint file is malformed."""


class BadMagicError(DataFormatError):
    """The file does not start with the expected magic number."""


class TruncatedFileError(DataFormatError):
    """The file is shorter (or longer) than its header announces."""


class CountMismatchError(DataFormatError):
    """Paired files disagree on the number of records."""


class InsufficientSamplesError(DataError):
    """A class has too few samples for the requested balanced split."""


class NumericalError(LcqhnnError, ArithmeticError):
    """Non-finite inputs, gradients, or losses."""
    exit_code = 3
