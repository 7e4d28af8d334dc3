"""Exception hierarchy shared by every kleinlab module."""


class KleinlabError(Exception):
    pass


class ValidationError(KleinlabError, ValueError):
    """Bad input: the CLI maps these to exit code 2."""


class BudgetExceeded(KleinlabError):
    """A word, iteration or excursion budget ran out (CLI exit code 3)."""


class InvalidMap(ValidationError):
    pass


class InvalidPoint(ValidationError):
    pass


class InvalidAngle(ValidationError):
    pass


class MixedScalarError(KleinlabError, TypeError):
    """Arithmetic between two different scalar variants."""


class DegenerateInput(ValidationError):
    pass


class OnCircle(ValidationError):
    pass


class OffCircle(ValidationError):
    pass


class AffineGraph(ValidationError):
    """The map fixes infinity (c = 0); use the affine description instead."""


class Unclassifiable(KleinlabError):
    pass


class PrimitiveElementFailure(KleinlabError):
    pass


class Unsupported(KleinlabError):
    pass


class PresentationError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FaceSetInsufficient(BudgetExceeded):
    """Greedy reduction did not settle: the face set does not cut out the domain."""
