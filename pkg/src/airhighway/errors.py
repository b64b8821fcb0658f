"""Exception hierarchy.

Everything raised on bad input derives from :class:`AirHighwayError`; the CLI
maps those to exit code 1.
"""


class AirHighwayError(Exception):
    """Base class for domain errors."""


# costmap
class UnknownCategory(AirHighwayError):
    pass


class NonPositiveFactor(AirHighwayError):
    pass


class DimensionMismatch(AirHighwayError):
    pass


class NonPositiveCost(AirHighwayError):
    pass


class OutOfBounds(AirHighwayError):
    pass


# eikonal
class OriginOutOfBounds(OutOfBounds):
    pass


class NoDescent(AirHighwayError):
    pass


class MaxStepsExceeded(AirHighwayError):
    pass


# highways
class DegeneratePath(AirHighwayError):
    pass


class DegenerateEdge(AirHighwayError):
    pass


class SOutOfRange(AirHighwayError):
    pass


# reachability
class GridMismatch(AirHighwayError):
    pass


class CFLViolation(AirHighwayError):
    pass


class NonFiniteValue(AirHighwayError):
    pass


class TimeOutOfRange(AirHighwayError):
    pass


class NonBoxTarget(AirHighwayError):
    pass


class FieldFormatError(AirHighwayError):
    pass


# vehicles / controllers / sim
class NonFiniteInput(AirHighwayError):
    pass


class IllegalTransition(AirHighwayError):
    def __init__(self, mode, event):
        super().__init__(f"illegal transition: {mode} + {event}")
        self.mode = mode
        self.event = event


class BRSMissing(AirHighwayError):
    pass


class NoLeader(AirHighwayError):
    pass


class InfeasibleHorizon(AirHighwayError):
    pass


class ConfigInvalid(AirHighwayError):
    pass
