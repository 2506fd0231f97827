"""Exception hierarchy shared by every layer of the package."""


class SieveBoundsError(Exception):
    """Base class for all package errors."""


class DomainError(SieveBoundsError, ValueError):
    """An operation was applied outside its mathematical domain."""


class ConfigError(SieveBoundsError, ValueError):
    """Invalid configuration or missing inputs."""


class TableRangeError(SieveBoundsError, ValueError):
    """A Buchstab query fell outside the tabulated range."""


class InfeasibleError(SieveBoundsError, ValueError):
    """No admissible exponent exists for the supplied bounds."""
