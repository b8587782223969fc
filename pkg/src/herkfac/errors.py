"""Exception hierarchy shared across the package."""


class HerKfacError(Exception):
    """Base class for all library errors."""


class ShapeError(HerKfacError, ValueError):
    pass


class CurvatureError(HerKfacError, ArithmeticError):
    """A curvature factor could not be inverted even after damping."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message if layer is None else f"layer {layer}: {message}")
        self.layer = layer


class StateError(HerKfacError, RuntimeError):
    pass


class NumericError(HerKfacError, ArithmeticError):
    """Non-finite values encountered; the offending update was not applied."""


class ValidationError(HerKfacError, ValueError):
    pass


class ConfigError(HerKfacError, ValueError):
    pass


class CheckpointError(HerKfacError, IOError):
    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at byte {position})")
        self.position = position


class FormatError(HerKfacError, ValueError):
    pass
