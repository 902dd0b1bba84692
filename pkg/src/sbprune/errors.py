"""Exception types shared across the toolkit (CLI maps these to exit codes)."""


class ShapeError(ValueError):
    """Tensor shape incompatible with a layer or pattern."""


class StateError(RuntimeError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


class DataError(ValueError):
    """Dataset missing or malformed (exit code 3)."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient (exit code 4)."""
