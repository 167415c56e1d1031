"""Error types raised across the package."""


class QuenchXYError(Exception):
    """Base class."""


class SizeError(QuenchXYError):
    pass


class CoverageError(QuenchXYError):
    pass


class TopologyError(QuenchXYError):
    pass


class PartitionError(QuenchXYError):
    pass


class DomainError(QuenchXYError, ValueError):
    pass


class PrecisionError(QuenchXYError):
    pass


class DegenerateInputError(QuenchXYError):
    pass


class UnsupportedError(QuenchXYError):
    pass


class DataError(QuenchXYError, ValueError):
    pass


class ConfigError(QuenchXYError, ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
