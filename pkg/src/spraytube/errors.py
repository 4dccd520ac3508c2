"""Exception hierarchy.

Every numerical failure raised by the library derives from
:class:`SprayTubeError`; configuration problems derive from
:class:`ConfigError`. The CLI maps the former to exit code 3 and the latter
to exit code 2.
"""


class SprayTubeError(Exception):
    """Base class for numerical and domain failures."""


class ConfigError(SprayTubeError):
    """Malformed or inconsistent user input."""


class InvalidSystem(ConfigError):
    pass


class InvalidString(ConfigError):
    pass


class GrammarError(ConfigError):
    pass


class UnknownName(ConfigError):
    pass


class ValidationFailure(ConfigError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvalidSeed(ConfigError):
    pass


class DegeneratePolygon(ConfigError):
    pass


class NonFiniteSample(SprayTubeError):
    pass


class UnmaterializableString(SprayTubeError):
    pass


class AtPole(SprayTubeError):
    pass


class AbscissaViolation(SprayTubeError):
    pass


class BoxCountMismatch(SprayTubeError):
    pass


class NotSimple(SprayTubeError):
    pass


class IntegerSingularity(SprayTubeError):
    pass


class ScalingIntegerCollision(SprayTubeError):
    pass


class NonConvergent(SprayTubeError):
    pass


class EpsOutOfRange(SprayTubeError):
    pass


class NotMonophase(SprayTubeError):
    pass


class ScreenThroughPole(SprayTubeError):
    pass


class ScreenPlacement(SprayTubeError):
    pass


class Explosion(SprayTubeError):
    pass


class TailUnavailable(SprayTubeError):
    pass


class NoBase(SprayTubeError):
    pass
