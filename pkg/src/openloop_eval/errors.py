"""Exception types raised across the toolkit."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class PreconditionError(ValueError):
    """An operation was called on data it is not defined for (e.g. an invalid sample)."""


class HorizonMismatchError(ValueError):
    """A trajectory or horizon does not match the 6-step / {1, 2, 3} s layout."""


class SchemaError(ValueError):
    """An interchange file failed validation.

    ``locus`` names the offending line and record so the message can be acted on.
    """

    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class MissingPredictionsError(LookupError):
    def __init__(self, sample_ids):
        self.sample_ids = list(sample_ids)
        shown = ", ".join(self.sample_ids[:20])
        more = "" if len(self.sample_ids) <= 20 else f" (+{len(self.sample_ids) - 20} more)"
        super().__init__(f"{len(self.sample_ids)} valid samples lack predictions: {shown}{more}")


class UndefinedMetricError(ValueError):
    """The metric has no contributing data (e.g. smoothness with < 2 predictions per instant)."""
