"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad configuration, command usage, or input file content."""


class ShapeFileError(ConfigError):
    """Malformed sample-point or polygon file."""
