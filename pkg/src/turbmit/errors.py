"""Exception hierarchy.

``DataError`` covers anything wrong with inputs on disk or their shapes; the
CLI maps it to exit code 2. ``NumericError`` marks a stage that produced
non-finite output (exit code 3).
"""


class TurbmitError(Exception):
    pass


class DataError(TurbmitError, ValueError):
    pass


class ImageNotFoundError(DataError, FileNotFoundError):
    pass


class UnsupportedFormatError(DataError):
    pass


class CorruptImageError(DataError):
    pass


class SequenceLayoutError(DataError):
    """Empty sequence directory or a gap in frame indices."""


class ShapeMismatchError(DataError):
    pass


class NumericError(TurbmitError, ArithmeticError):
    pass
