"""Exception hierarchy shared by every vlgreedy module."""


class VLGreedyError(Exception):
    """Base class for all library errors."""


class InvalidExponentError(VLGreedyError, ValueError):
    """An exponent value is not in (1, inf) or a recipe is malformed."""


class AlignmentError(VLGreedyError, ValueError):
    """Region or array shape does not align with the depth-J grid."""


class EmptyRegionError(VLGreedyError, ValueError):
    pass


class InvalidParameterError(VLGreedyError, ValueError):
    pass


class InvalidRangeError(VLGreedyError, ValueError):
    pass


class InvalidInputError(VLGreedyError, ValueError):
    pass


class OutOfDomainError(VLGreedyError, ValueError):
    pass


class ContainmentError(VLGreedyError, ValueError):
    pass


class ResolutionError(VLGreedyError, ValueError):
    """A cube is too fine for the requested operation at depth J."""


class UndefinedRatioError(VLGreedyError, ZeroDivisionError):
    pass


class FitError(VLGreedyError, ValueError):
    pass


class CapacityError(VLGreedyError):
    """A cube family of the requested size does not fit at depth J.

    ``max_feasible`` is the largest size the same construction can deliver.
    """

    def __init__(self, message, max_feasible=0):
        super().__init__(message)
        self.max_feasible = max_feasible


class ConfigError(VLGreedyError, ValueError):
    pass
