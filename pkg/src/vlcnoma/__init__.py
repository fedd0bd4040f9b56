"""Indoor VLC downlink simulator: Lambertian ray tracing, angle-diversity receivers and NOMA allocation."""

__version__ = "0.1.0"

from .exceptions import (DomainError, EnumerationCapError, ExcludedUserError, NoCoverageError,  # noqa: E402
                         ScenarioParseError, ScenarioValidationError, UndefinedBandwidthError, VLCError)

__all__ = ["__version__", "DomainError", "EnumerationCapError", "ExcludedUserError", "NoCoverageError",
           "ScenarioParseError", "ScenarioValidationError", "UndefinedBandwidthError", "VLCError"]
