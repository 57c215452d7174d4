"""Exception hierarchy for the enspost package."""


class EnspostError(Exception):
    """Base class for all enspost errors."""


class ParseError(EnspostError):
    """A file row could not be parsed; carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SchemaError(EnspostError):
    """Input data violates the declared schema or a value invariant."""


class EmptyDatasetError(EnspostError):
    """No date exists with both a complete forecast and observation."""


class DegenerateClimatologyError(EnspostError):
    """A margin has zero observed variance; standardization is impossible."""


class MarginLookupError(EnspostError, KeyError):
    """A margin is not present in the catalog at hand."""


class InsufficientTrainingError(EnspostError):
    """Fewer training instances are available than requested.

    Attributes
    ----------
    available : int
        Number of instances actually available before the target date.
    """

    def __init__(self, message, available):
        super().__init__(message)
        self.available = available


class ParameterError(EnspostError, ValueError):
    """An argument is outside the operation's admissible domain."""


class DomainError(EnspostError, ValueError):
    """A data value lies outside the distribution's support."""


class FitError(EnspostError):
    """The optimizer failed to converge; carries the best parameters found."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class DegenerateFitError(EnspostError):
    """Training data carries no usable signal (constant everywhere)."""


class DegeneratePredictiveError(EnspostError):
    """Plugged-in parameters yield a distribution with no spread."""


class AggregationError(EnspostError):
    """Records with incompatible shapes were aggregated."""


class RejectionUnsuitableError(EnspostError):
    """Rejection sampling acceptance is below threshold; use the Gibbs path.

    Attributes
    ----------
    acceptance : float
        Estimated acceptance probability of the rejection sampler.
    """

    def __init__(self, message, acceptance):
        super().__init__(message)
        self.acceptance = acceptance


class SamplingError(EnspostError):
    """Sampling from a predictive distribution failed."""


class InsufficientHistoryError(EnspostError):
    """Not enough historical observations to build the requested template."""


class ConfigurationError(EnspostError):
    """An experiment or reordering plan is internally inconsistent."""


class ExperimentError(EnspostError):
    """An experiment produced no scoreable dates or is otherwise unusable."""
