"""Exception types shared across the package."""


class KMError(Exception):
    """Base class for all kmlab errors."""


class ConfigError(KMError):
    """Invalid configuration, parameter, or input file."""


class AccuracyError(KMError):
    """A numerical routine could not reach its accuracy target."""


class BlowUpError(KMError):
    """A trajectory left the representable range."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time
