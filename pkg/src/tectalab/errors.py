"""Exception taxonomy shared across the toolkit.

The CLI maps these classes onto distinct exit codes (config errors -> 2,
data errors -> 3, numeric failures -> 4); everything else exits 1.
"""


class TectalabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TectalabError):
    """Invalid run configuration, CLI arguments, or infeasible synthesis spec."""


class DataError(TectalabError):
    """Malformed or inconsistent input data."""


class CircuitFormatError(DataError):
    """Connection-matrix document violates the schema or a circuit invariant."""


class GroupError(DataError):
    """Unknown group name, unknown node name, or bad group definition."""


class NumericError(TectalabError):
    """Non-finite state encountered during integration, simulation, or training.

    ``where`` carries the step or epoch index at which the failure occurred.
    """

    def __init__(self, message: str, where: int | None = None):
        super().__init__(message if where is None else f"{message} (at index {where})")
        self.where = where
