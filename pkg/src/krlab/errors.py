"""Exception hierarchy shared by all krlab modules."""


class KrlabError(Exception):
    """Base class for every error raised by krlab."""


class InvalidParameter(KrlabError, ValueError):
    pass


class InvalidSchedule(KrlabError, ValueError):
    pass


class InvalidInput(KrlabError, ValueError):
    pass


class NumericError(KrlabError, ArithmeticError):
    """Failures of the numerics themselves (as opposed to bad input)."""


class GridTooSmall(NumericError):
    def __init__(self, message, edge_occupancy=None, member=None):
        super().__init__(message)
        self.edge_occupancy = edge_occupancy
        self.member = member


class FitFailed(NumericError):
    pass


class ConfigError(KrlabError, ValueError):
    """Invalid run configuration; `line` points into the config text when known."""

    def __init__(self, message, line=None):
        self.message = message
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")
