class WattprintError(ValueError):
    """Base class for every input/validation failure raised by this package."""


class ConfigError(WattprintError):
    pass


class TraceParseError(WattprintError):
    def __init__(self, message, row=None, token=None):
        self.row = row
        self.token = token
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ReadingsError(WattprintError):
    pass


class FitError(WattprintError):
    pass


class ModelError(WattprintError):
    pass


class CoverageError(WattprintError):
    pass
