"""Exception hierarchy shared by the simulator modules."""


class VLCError(Exception):
    """Base class for all simulator errors."""


class DomainError(VLCError, ValueError):
    """An argument lies outside the domain of the operation."""


class UndefinedBandwidthError(VLCError, ValueError):
    """Bandwidth requested for an all-zero impulse response."""


class NoCoverageError(VLCError):
    """A user receives no signal from its serving access point."""

    def __init__(self, user_id, message=None):
        self.user_id = user_id
        super().__init__(message or f"user {user_id!r} has zero channel gain to its serving access point")


class ExcludedUserError(VLCError, ValueError):
    """A user with a non-positive gain was passed to power allocation."""

    def __init__(self, user_id, gain):
        self.user_id = user_id
        self.gain = gain
        super().__init__(f"user {user_id!r} has non-positive channel gain {gain!r}")


class EnumerationCapError(VLCError):
    """Exhaustive assignment search would exceed the configured cap."""


class ScenarioParseError(VLCError):
    """The scenario file is not well-formed structured text."""


class ScenarioValidationError(VLCError):
    """The scenario file parsed but holds invalid or unknown fields."""

    def __init__(self, errors):
        # errors: list of (field_path, message, line or None)
        self.errors = list(errors)
        lines = []
        for field, msg, line in self.errors:
            where = f" (line {line})" if line is not None else ""
            lines.append(f"{field}{where}: {msg}")
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))
