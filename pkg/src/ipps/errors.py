"""Exception types shared across the package."""


class IppsError(Exception):
    """Base class for all package errors."""


class StructureError(IppsError, ValueError):
    """Shape or parity of an input is wrong (e.g. odd matrix order)."""


class InputError(IppsError, ValueError):
    """An input value is outside its admissible range."""


class WindowTooLargeError(IppsError, ValueError):
    """The exact engine was asked for a window beyond its state-space cap."""


class ConfigError(IppsError, ValueError):
    """A run configuration is malformed or inconsistent."""
