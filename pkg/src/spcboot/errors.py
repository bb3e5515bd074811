"""Exception hierarchy shared across the package.

Two branches matter for the CLI: :class:`InputError` maps to exit code 2
(bad data or configuration), :class:`NumericalError` maps to exit code 3
(a computation could not be completed).
"""


class SpcError(Exception):
    """Base class for all package errors."""


class InputError(SpcError):
    """Invalid data, configuration, or incompatible objects."""


class NumericalError(SpcError):
    """A numerical procedure failed or left its domain."""


class DegenerateSample(InputError):
    """Sample has zero variance where a spread estimate is required."""


class NonPositiveData(InputError):
    """Exponential-family fit requires strictly positive observations."""


class IncompatibleModelChart(InputError):
    """Model kind and chart family cannot be combined."""


class NonFiniteObservation(InputError):
    """A monitored stream contains NaN or infinity."""


class TargetUnattainable(NumericalError):
    """No admissible threshold attains the requested exceedance target."""


class ZeroExceedance(NumericalError):
    """Exceedance probability is zero, so the run length has no mean."""


class NonAbsorbing(NumericalError):
    """Transition matrix is (near-)stochastic: absorption is not certain."""


class BracketFailure(NumericalError):
    """Threshold search could not bracket the target within its caps."""


class TransformDomain(NumericalError):
    """Value outside the domain of the requested transform."""


class DegenerateResample(NumericalError):
    """Bootstrap refit failed (for example zero variance) after a retry."""


class TooManyFailures(NumericalError):
    """More than 1% of bootstrap replicates failed; quantiles would be biased."""


class RankDeficient(InputError):
    """Design matrix does not have full column rank."""


class Separation(NumericalError):
    """Logistic fit diverged: the data are (quasi-)separated."""


class NoConvergence(NumericalError):
    """Iterative fit did not converge within its iteration budget."""


class TruncatedRuns(NumericalError):
    """Too many Monte Carlo runs hit the horizon cap before alarming."""
