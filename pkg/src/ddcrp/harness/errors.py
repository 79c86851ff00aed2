"""Harness error types and their exit codes."""


class HarnessError(Exception):
    kind = "error"
    exit_code = 1


class ConfigError(HarnessError):
    kind = "config"
    exit_code = 2


class DataError(HarnessError):
    kind = "data"
    exit_code = 3


class NumericError(HarnessError):
    kind = "numeric"
    exit_code = 4
