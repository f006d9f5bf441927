"""Exception and warning types shared across the package."""


class ForestPriorError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ForestPriorError, ValueError):
    """Invalid tuning or kernel configuration."""


class EstimationError(ForestPriorError, ValueError):
    """Density or mutual-information estimation failed on the given data."""


class ContractError(ForestPriorError, ValueError):
    """An argument violates an operation's precondition."""


class DataError(ForestPriorError):
    """Malformed input file or dataset."""


class DegenerateColumnWarning(UserWarning):
    """A column has zero variance; a defined fallback value was used."""
