"""Exception types shared across the package."""


class CGSPError(Exception):
    pass


class ConfigError(CGSPError, ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(CGSPError, ValueError):
    """Unreadable, malformed or degenerate interaction data."""
