"""Exception types raised across the package."""


class WaferTDAError(Exception):
    """Base class for all package errors."""

    code = "error"


class InvalidInput(WaferTDAError, ValueError):
    code = "invalid_input"


class InvalidComplex(WaferTDAError, ValueError):
    code = "invalid_complex"


class InvalidParameter(WaferTDAError, ValueError):
    code = "invalid_parameter"


class InvalidDiagram(WaferTDAError, ValueError):
    code = "invalid_diagram"


class ShapeError(WaferTDAError, ValueError):
    code = "shape_error"


class LabelError(WaferTDAError, ValueError):
    code = "label_error"


class FormatError(WaferTDAError, ValueError):
    code = "format_error"
