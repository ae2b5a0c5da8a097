"""Exception hierarchy. Every error is a ValueError so generic callers can catch it."""


class NetcastError(ValueError):
    pass


class InvalidArgument(NetcastError):
    pass


class RangeError(NetcastError):
    """A float fell outside the encodable range and clipping was not requested."""


class CalibrationError(NetcastError):
    pass


class ConfigError(NetcastError):
    """Scenario or preset inconsistency, raised before any sampling happens."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ModelFormatError(NetcastError):
    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class CalibrationDriftWarning(UserWarning):
    """A photon-counting readout decoded to a negative count before clamping."""
