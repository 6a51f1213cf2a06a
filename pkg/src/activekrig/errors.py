"""Exception hierarchy shared across the toolkit.

Two broad families matter for callers: configuration/input problems
(``ConfigError``, a ``ValueError``) and numerical breakdowns
(``NumericalError``, a ``RuntimeError``).  The command line maps the former
to exit code 2 and the latter to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid configuration or input data supplied by the caller."""


class UnsupportedDimensionError(ConfigError):
    """Requested an operation outside its implemented dimension range."""


class NonPoisedDesignError(ConfigError):
    """Design cannot support the requested polynomial mean surface."""


class DegenerateDirectionError(ConfigError):
    """A retained subspace direction has zero eigenvalue."""


class NumericalError(RuntimeError):
    """A numerical routine failed beyond recovery."""


class DegenerateSubspaceError(NumericalError):
    """Gradient sample matrix carries no spectral information."""


class ConditioningError(NumericalError):
    """Linear algebra failed even after diagonal regularization."""


class CoefficientOverflowError(NumericalError):
    """Log-coefficient field left the range safe for exponentiation."""


class InfeasiblePointError(NumericalError):
    """No full-space point maps to the requested reduced point."""
