"""Exception hierarchy shared across the package."""


class HousebenchError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(HousebenchError):
    """Invalid run configuration or command-line usage."""


class DataError(HousebenchError):
    """Malformed input data, schema violations, or degenerate columns."""


class ModelError(HousebenchError):
    """Model fitting or prediction failure."""
