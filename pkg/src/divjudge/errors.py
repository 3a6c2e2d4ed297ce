"""Exception hierarchy. The CLI maps each class to a process exit code."""


class DivJudgeError(Exception):
    exit_code = 1


class ConfigError(DivJudgeError, ValueError):
    """Bad configuration or command-line usage."""

    exit_code = 1


class DataError(DivJudgeError, ValueError):
    """Unreadable, malformed or insufficient input data."""

    exit_code = 2


class NumericalError(DivJudgeError, ArithmeticError):
    """A computation produced non-finite values or a matrix lost definiteness."""

    exit_code = 3
