"""Error taxonomy shared across the package.

ConfigError maps to CLI exit code 2, RuntimeFault to exit code 3.
"""


class ConfigError(Exception):
    """Invalid configuration: unknown key, out-of-range value, bad category."""


class RuntimeFault(Exception):
    """Unrecoverable fault while running (I/O failure, non-finite state)."""
