"""Exception hierarchy shared by the library and the command line.

Every exception carries the process exit code the CLI should use when it
escapes to the top level.
"""


class SimEmbedError(Exception):
    exit_code = 2


class ConfigError(SimEmbedError, ValueError):
    """Invalid parameter or flag value."""

    exit_code = 1


class InputError(SimEmbedError):
    """An input file is unreadable, malformed or inconsistent."""

    exit_code = 2


class GraphFormatError(InputError):
    pass


class ModelFormatError(InputError):
    pass


class CapExceededError(SimEmbedError):
    """A dense computation was requested on a graph above its node cap."""

    exit_code = 3
