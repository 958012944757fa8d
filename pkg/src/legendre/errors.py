"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`LegendreError`. Input-validation errors also derive from
``ValueError`` so generic callers can catch them the usual way.
"""


class LegendreError(Exception):
    pass


class InputError(LegendreError, ValueError):
    pass


class NumericError(LegendreError, ArithmeticError):
    pass


# tensor-core
class AllZeroTensor(InputError):
    pass


class NegativeEntry(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class SupportViolation(InputError):
    pass


class ParseError(InputError):
    pass


# poset-basis
class DimensionMismatch(InputError):
    pass


class EmptySupport(InputError):
    pass


class InvalidCoreSize(InputError):
    pass


# engine
class UnknownScheme(InputError):
    pass


class SingularSystem(NumericError):
    pass


class NonFiniteState(NumericError):
    pass


class OverflowGuard(NonFiniteState):
    pass


class ConvergenceFailure(NumericError):
    pass


# metrics-clustering
class LengthMismatch(InputError):
    pass


class TooFewSamples(InputError):
    pass


class BadK(InputError):
    pass


class UnknownKind(InputError):
    pass
