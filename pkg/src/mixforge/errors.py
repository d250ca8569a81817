"""Exception hierarchy.

CLI exit codes hang off the ``exit_code`` attribute so the front-end does
not need to know which module raised.
"""


class MixforgeError(Exception):
    exit_code = 1


class ParameterError(MixforgeError, ValueError):
    """Out-of-range model parameter (epsilon, theta, r, family params)."""

    exit_code = 2


class DomainError(MixforgeError, ValueError):
    """Evaluation outside the domain of a function, or a non-finite value."""

    exit_code = 2


class ValidationError(MixforgeError, ValueError):
    """Malformed probability table or configuration."""

    exit_code = 2


class ConfigError(ValidationError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class EnvelopeExhaustedError(MixforgeError):
    """Bracket expansion for the next breakpoint passed ``x_cap``."""

    exit_code = 3


class LegCapError(MixforgeError):
    exit_code = 3


class NeedsMoreLegsError(MixforgeError):
    """The scaffold is too short for the requested truncation or lag range."""

    exit_code = 3

    def __init__(self, message, required_x_max=None):
        self.required_x_max = required_x_max
        super().__init__(message)


class CapError(MixforgeError):
    """A support size exceeded the cap of an exact (exponential-cost) routine."""

    exit_code = 2


class DegenerateSupportError(MixforgeError, ValueError):
    exit_code = 2


class CompositionError(MixforgeError, ValueError):
    exit_code = 2


class OracleInconclusiveError(MixforgeError):
    """Power iteration did not settle within the iteration budget."""

    exit_code = 4


class SampleSizeError(MixforgeError, ValueError):
    exit_code = 2
