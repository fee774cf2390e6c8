"""Exception hierarchy shared by the library and the CLI."""


class ChannelModelError(ValueError):
    """Base class; ``kind`` is the machine-readable tag the CLI prints."""

    kind = "error"
    exit_code = 1


class DomainError(ChannelModelError):
    kind = "domain"
    exit_code = 5


class InsufficientDataError(ChannelModelError):
    kind = "insufficient_data"
    exit_code = 4


class FormatError(ChannelModelError):
    kind = "format"
    exit_code = 3


class DataError(ChannelModelError):
    kind = "data"
    exit_code = 3


class GridError(DataError):
    kind = "grid"


class VersionError(FormatError):
    kind = "version"
