"""Exception hierarchy shared across the package."""


class SdeBreaksError(Exception):
    """Base class for all errors raised by sdebreaks."""


class InvalidInputError(SdeBreaksError, ValueError):
    """An argument violates an operation's precondition."""


class CalendarError(SdeBreaksError):
    """A date cannot be resolved against the trading calendar."""


class InsufficientDataError(SdeBreaksError):
    """Not enough bars on one side of a break."""

    def __init__(self, side: str, needed: int, available: int):
        self.side = side
        self.needed = needed
        self.available = available
        super().__init__(
            f"insufficient data on {side} side: need {needed} bars, have {available}"
        )


class IngestError(SdeBreaksError):
    """Problem reading an input file."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ParseError(IngestError):
    """A row could not be parsed."""


class ValidationError(IngestError):
    """A row parsed but violates a data invariant."""
