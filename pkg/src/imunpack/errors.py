"""Exception types raised by the library.

All of them subclass a builtin so callers that only care about the broad
category (``ValueError``, ``OverflowError``) can keep catching that.
"""


class ShapeError(ValueError):
    """Operand dimensions do not line up."""


class AccumulatorOverflowError(OverflowError):
    """An integer product could exceed the signed 64-bit accumulator."""


class OutOfBoundError(ValueError):
    """A low bit-width kernel received an entry outside the In-Bound set."""


class MatrixFormatError(ValueError):
    """A matrix file is malformed (bad magic, truncated payload, bad cell)."""
