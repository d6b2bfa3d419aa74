"""Shared exception types.

ConfigError: the request itself is malformed (bad field, missing cap, bad
grid).  NumericalError: the computation could not be completed at the
requested budgets (window exhausted, runaway growth without a cap, ...).
The command-line layer maps them to exit codes 1 and 2.
"""


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass
