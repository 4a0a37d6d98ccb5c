"""Exceptions raised by inclino, each carrying the exit code used by the CLI."""

import typing as T


class InclinoError(RuntimeError):
    exit_code = 1


class ConfigError(InclinoError, ValueError):
    exit_code = 2


class InvalidParameterError(InclinoError, ValueError):
    exit_code = 2


class ParseError(InclinoError):
    exit_code = 3


class SchemaError(ParseError):
    exit_code = 3


class InclinoIOError(InclinoError, OSError):
    exit_code = 3


class NumericalError(InclinoError):
    exit_code = 4


class SingularModelError(NumericalError):
    def __init__(self, message: str, step: T.Union[int, None] = None) -> None:
        super().__init__(message)
        self.step = step


class EMDivergenceError(NumericalError):
    def __init__(self, message: str, log_likelihoods: T.Sequence[float] = ()) -> None:
        super().__init__(message)
        self.log_likelihoods = list(log_likelihoods)


class DegenerateTemplateError(NumericalError):
    pass


class SingularGateError(NumericalError):
    pass


class SingularMetricError(NumericalError):
    pass


class InsufficientDataError(InclinoError):
    exit_code = 5
