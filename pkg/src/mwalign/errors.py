"""Exception types shared across the package."""


class MwalignError(Exception):
    """Base class for all package errors."""


class ParseError(MwalignError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ShapeError(MwalignError, ValueError):
    pass


class ArgumentError(MwalignError, ValueError):
    pass


class EvalError(MwalignError, RuntimeError):
    pass


class RefinementError(MwalignError, RuntimeError):
    """Raised when no usable pseudo-dictionary can be induced."""


class IoError(MwalignError, OSError):
    pass
