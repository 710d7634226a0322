class HomlabError(Exception):
    """Base class for toolkit errors."""


class SamplingError(HomlabError, ValueError):
    """Time grid too coarse for the frequencies it must carry."""


class GridError(HomlabError, ValueError):
    """Time grid violates its invariants or does not cover the pulses."""


class ShapeError(HomlabError, ValueError):
    """Signals that must share a grid or representation do not."""


class DomainError(HomlabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NormalizationError(HomlabError, ZeroDivisionError):
    """A normalizing mean or reference value is zero."""


class PreconditionError(HomlabError, ValueError):
    """Input violates a documented precondition."""


class ConfigError(HomlabError, ValueError):
    """Experiment configuration failed validation.

    ``field`` names the offending key as ``section.key``.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
