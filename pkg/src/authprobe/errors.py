"""Exception hierarchy shared across the toolkit."""


class AuthProbeError(Exception):
    """Base class for every error raised by authprobe."""


class ParseError(AuthProbeError):
    pass


class UnsupportedSpecError(AuthProbeError):
    pass


class MissingServerError(AuthProbeError):
    pass


class MissingRequiredParameterError(AuthProbeError):
    pass


class FormatError(AuthProbeError):
    """A persisted trace file does not follow the JSON-lines layout."""


class EmptyTokenError(AuthProbeError):
    pass


class NoEligiblePositionError(AuthProbeError):
    pass


class ExhaustedMutationsError(AuthProbeError):
    pass


class NoLoginOperationError(AuthProbeError):
    pass


class InsufficientDataError(AuthProbeError):
    pass


class TraceMismatchError(AuthProbeError):
    pass


class BindError(AuthProbeError):
    pass
