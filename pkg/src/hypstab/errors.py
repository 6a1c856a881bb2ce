"""Exception hierarchy shared by all hypstab modules."""


class HypstabError(Exception):
    """Base class for every error raised by hypstab."""


# matrix kernel
class SingularMatrix(HypstabError):
    pass


class NotDiagonalizable(HypstabError):
    pass


class ComplexSpectrum(HypstabError):
    pass


class ZeroEigenvalue(HypstabError):
    pass


class NotSymmetric(HypstabError):
    pass


class NonConvergence(HypstabError):
    pass


# boundary construction
class MaskViolation(HypstabError):
    """Nonzero control entries supplied for an unobservable variable in strict mode."""


class IllPosedBoundary(HypstabError):
    """The boundary conditions cannot be solved for the incoming Riemann traces."""


class NotApplicable(HypstabError):
    pass


# models
class DegenerateDenominator(HypstabError):
    pass


class Supercritical(HypstabError):
    pass


class EmptyRange(HypstabError):
    """No admissible control interval exists for the requested configuration."""


# simulation
class InsufficientData(HypstabError):
    pass


# scenario / cli
class ParseError(HypstabError):
    def __init__(self, msg, line=None, key=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            msg = f"{msg} ({', '.join(where)})"
        super().__init__(msg)
        self.line = line
        self.key = key


class UnknownParameterPath(HypstabError):
    pass
