"""Exception hierarchy shared by all modules."""


class HawkesError(Exception):
    """Base class for library errors."""


class DomainError(HawkesError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ShapeError(HawkesError, ValueError):
    pass


class NonstationaryError(HawkesError, ValueError):
    """Interaction matrix has spectral radius >= 1."""


class ConfigurationError(HawkesError, ValueError):
    pass


class GuardError(HawkesError, RuntimeError):
    """A simulation guard (event count, generation depth) was exceeded."""


class EvaluationError(HawkesError, ArithmeticError):
    """Objective could not be evaluated at the requested parameter."""


class ContractError(HawkesError, ValueError):
    pass


class FitError(HawkesError, RuntimeError):
    pass


class CovarianceError(HawkesError, RuntimeError):
    pass


class KernelError(HawkesError, ValueError):
    pass


class DataError(HawkesError, ValueError):
    pass


class MetricError(HawkesError, ValueError):
    pass


class ExperimentError(HawkesError, RuntimeError):
    """Too many replications of an experiment failed."""
