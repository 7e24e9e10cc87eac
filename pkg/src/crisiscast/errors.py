"""Exception hierarchy.

Three branches under the package root error, mirroring the three failure
surfaces callers care about: bad caller input (UsageError), bad or
insufficient data (DataError), and numerical breakdown (NumericalError).
The service maps these to HTTP 400 / 422 / 500 and the CLI to exit codes
1 / 2 / 3.
"""


class CrisiscastError(Exception):
    """Root of the package exception hierarchy."""


# ---------------------------------------------------------------- usage


class UsageError(CrisiscastError):
    """Caller passed an argument outside its documented domain."""


class BadParameter(UsageError):
    pass


class TauOutOfRange(UsageError):
    """Quantile level must lie strictly inside (0, 1)."""


class LambdaOutOfRange(UsageError):
    """Relevance interpolation weight must lie in [0, 1]."""


class HorizonOutOfRange(UsageError):
    """Forecast horizon must be a positive integer."""


class IndexOutOfRange(UsageError):
    pass


class DegenerateSampleSize(UsageError):
    """A window or sample was requested that the data cannot supply."""


class PlanTooLarge(UsageError):
    """Requested search or backtest plan exceeds configured limits."""


class OverlappingWeekSets(UsageError):
    """Week sets that must be disjoint share at least one week."""


class BadHyperparameter(UsageError):
    """A model hyperparameter is outside its valid range."""


# ----------------------------------------------------------------- data


class DataError(CrisiscastError):
    """Input data violates a precondition of the requested operation."""


class NonPositiveValue(DataError):
    """Log transform requires strictly positive values."""


class SeriesTooShort(DataError):
    pass


class GapError(DataError):
    """Weekly series must cover consecutive Mondays with no gaps."""


class ParseError(DataError):
    pass


class NonMondayDate(DataError):
    pass


class ZeroActual(DataError):
    """Percentage error is undefined when an actual value is zero."""


class ZeroLagValue(DataError):
    """Growth ratio is undefined when the lagged value is zero."""


class DivisionByZeroValue(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class UnknownTerm(DataError):
    pass


class InsufficientSeeds(DataError):
    """Essentiality scoring needs at least one usable seed term."""


class MissingFutureExog(DataError):
    """Forecasting with regressors requires their future values."""


class DegenerateExog(DataError):
    """Exogenous matrix has a zero or linearly dependent column."""


class RankDeficientDesign(DataError):
    pass


class IncompleteYear(DataError):
    """Annual aggregation only covers years fully inside the series."""


# ------------------------------------------------------------ numerical


class NumericalError(CrisiscastError):
    """An estimation routine failed to produce a usable result."""


class NonConvergence(NumericalError):
    pass


class NonStationaryParams(NumericalError):
    """Parameter vector leaves the stationary or invertible region."""


class NoConvergedCandidate(NumericalError):
    """Order search exhausted its grid without one successful fit."""


class DegenerateRegime(NumericalError):
    """A regime collapsed (zero weight or zero variance) during EM."""
