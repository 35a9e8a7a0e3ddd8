"""
Exception hierarchy for the simulator services.

Each family maps onto one CLI exit code (see commands/run.py).
"""


class SimulationError(Exception):
    """Base class for every error raised by the simulator services."""


class ConfigError(SimulationError, ValueError):
    """Malformed or inconsistent run configuration."""


class InvalidRegularizerError(SimulationError, ValueError):
    """Negative (or non-positive where required) regularization parameter."""


class InfeasibleScenarioError(SimulationError):
    """The requested scenario cannot be served as configured."""


class ZFInfeasibleError(InfeasibleScenarioError):
    """Zero-forcing constraints exceed the spatial degrees of freedom."""


class NoActiveUsersError(InfeasibleScenarioError):
    """Every user is served from its own cache; nothing is transmitted."""


class NumericalError(SimulationError, ArithmeticError):
    """A numerical quantity is undefined or could not be computed."""


class DegenerateChannelError(NumericalError):
    """A zero channel vector was passed where a direction is needed."""


class ExpectationDivergesError(NumericalError):
    """The requested expectation does not exist."""


class OptimizerDomainError(NumericalError):
    """The objective returned a non-finite value inside the search range."""
