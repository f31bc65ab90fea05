"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor/grid extents do not satisfy an operation's contract."""


class FormatError(ValueError):
    """A file or stream does not match its declared binary/text format."""


class DegenerateMapError(ValueError):
    """A map is constant / empty where a metric needs variation or support."""


class TapeError(RuntimeError):
    """Backward pass requested without a recorded forward graph."""
