"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CausalRegError(Exception):
    exit_code = 1


class ConfigError(CausalRegError, ValueError):
    exit_code = 2


class DataError(CausalRegError, ValueError):
    exit_code = 3


class NumericalError(CausalRegError, ArithmeticError):
    exit_code = 4
