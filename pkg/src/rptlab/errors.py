"""Exception hierarchy.  ``exit_code`` is what the command line returns."""
from __future__ import annotations


class RptError(Exception):
    exit_code = 3


class ConfigError(RptError):
    """Malformed configuration; carries a JSON pointer when known."""

    exit_code = 2

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer


# expression errors are configuration errors when raised while loading
class ExprError(ConfigError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


class UnknownIdentifier(ExprError):
    pass


class ArityError(ExprError):
    pass


class EvalDomainError(RptError):
    pass


# geometry
class DegenerateBoundary(RptError):
    pass


class EmptyTube(RptError):
    pass


# symbols
class PrincipalMismatch(RptError):
    pass


class CharacteristicBoundary(RptError):
    pass


# flow
class NotNull(RptError):
    pass


class StartsOutside(RptError):
    pass


class GrazingUndecidable(RptError):
    pass


class Trapped(RptError):
    pass


class NotMaximal(RptError):
    pass


# beams
class ImaginaryPartLoss(RptError):
    pass


class QuadratureNonconvergence(RptError):
    pass


class ResolutionTooCoarse(RptError):
    pass


class IdentityViolation(RptError):
    def __init__(self, message: str, worst: float = float("nan"), index: int = -1):
        super().__init__(message)
        self.worst = worst
        self.index = index


# boundary
class NoEllipticRoot(RptError):
    pass


class RootNotSimple(RptError):
    pass


# transforms
class EndpointNotVanishing(RptError):
    pass


class VerificationFailure(RptError):
    exit_code = 1
