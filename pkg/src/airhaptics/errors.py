"""Exception hierarchy. Everything derived from HapticsError maps to CLI exit code 1."""


class HapticsError(Exception):
    """Base class for all domain errors raised by airhaptics."""


class ValidationError(HapticsError, ValueError):
    pass


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateGeometryError(ValidationError):
    pass


class ContractError(ValidationError):
    """Mismatched inputs, e.g. a phase pattern built for another array."""


class RateCapError(ValidationError):
    """Update rate above the 40 kHz device limit."""


class ProfileIntegrityError(ValidationError):
    pass


class ConflictError(HapticsError):
    pass


class UnknownSensationError(HapticsError, LookupError):
    pass


class ConfigError(ValidationError):
    """A config document failed validation; ``problems`` itemizes every issue."""

    def __init__(self, problems, source=None):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        self.source = source
        head = f"{source}: " if source else ""
        super().__init__(head + "; ".join(self.problems))


class ParseError(ValidationError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(f"{message} at row {row}" if row is not None else message)
