"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """A scenario or device parameter is invalid.

    ``field`` carries the dotted path of the offending entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NotApplicableError(ConfigurationError):
    """The (protocol, attack) pair is marked "--" in the applicability matrix."""


class ProtocolViolation(ValueError):
    """A party deviated from the message format the protocol prescribes."""


class ProtocolAbort(RuntimeError):
    """The protocol cannot continue (no data, or an estimate failed a check)."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)
