"""Exception types. Each maps to a CLI exit code."""


class StratError(Exception):
    exit_code = 1


class ConfigError(StratError, ValueError):
    exit_code = 2


class DataError(StratError, ValueError):
    exit_code = 3


class NumericalError(StratError, ArithmeticError):
    exit_code = 4
