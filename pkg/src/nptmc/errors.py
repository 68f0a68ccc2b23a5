"""Exception types shared across the toolkit."""


class NptError(Exception):
    """Base class for all toolkit errors."""


class UndefinedOperation(NptError):
    """A stack operation is undefined on the given stack (e.g. popping a
    width-1 sequence at its own level)."""


class NotAPrefix(NptError):
    """Prefix replacement was asked to replace a stack that is not a prefix."""


class LevelUnsupported(NptError):
    """The operation is only implemented for stack/system levels <= 2."""


class Inapplicable(NptError):
    """A transition does not apply to a configuration (state mismatch,
    top-symbol mismatch, or undefined operation)."""


class EndpointMismatch(NptError):
    """Run composition requires the first run to end where the second starts."""


class Unreachable(NptError):
    """The stack cannot be generated from the initial stack by
    {push, pop1, clone2}."""


class PreconditionViolated(NptError):
    """A structural precondition failed; `index` points at the offending
    run position when one exists."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (at index {index})")
        self.index = index


class SignatureMismatch(NptError):
    """Replacement stacks disagree on their loop/return signatures."""


class BudgetExhausted(NptError):
    """A bounded search ran out of budget before finding a witness.

    The result is unknown, never silently wrong.
    """


class SizeLimit(NptError):
    """A finite structure grew past its configured cap."""


class LimitExceeded(NptError):
    """A hard diagnostic cap was exceeded (2**16 states/symbols, 2**32 lengths)."""


class FormulaSyntaxError(NptError):
    """Formula text failed to parse; `position` is a character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class SystemParseError(NptError):
    """System file failed to parse; `line` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


MAX_MEMBERS = 2 ** 16
MAX_LENGTH = 2 ** 32
