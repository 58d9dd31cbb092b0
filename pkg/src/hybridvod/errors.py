"""Exception hierarchy shared by every module."""


class HybridVodError(Exception):
    """Base class for all package errors."""


class InvalidArgument(HybridVodError, ValueError):
    pass


class SizeLimitError(InvalidArgument):
    """An exhaustive enumeration was asked to run past its size cap."""


class ConfigError(HybridVodError, ValueError):
    """Bad simulation configuration.

    ``line`` is the 1-based line number in the config text when the error
    came from parsing a file, otherwise ``None``.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TopologyError(HybridVodError, ValueError):
    pass
