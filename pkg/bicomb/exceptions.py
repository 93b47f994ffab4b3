class BicombingLabError(RuntimeError):
    pass


class MalformedInputError(BicombingLabError, ValueError):
    pass


class UnknownSpaceFamilyError(MalformedInputError):
    pass


class InvalidGluingError(MalformedInputError):
    pass


class InvalidComplexError(MalformedInputError):
    pass


class NormConstraintError(MalformedInputError):
    pass


class SearchExhaustedError(BicombingLabError):
    pass


class CertificateError(BicombingLabError):
    pass


class WindowTooSmallError(BicombingLabError):
    pass


class NonConvergenceError(BicombingLabError):
    pass


class HorizonError(BicombingLabError):
    pass


class NotSeparatedError(BicombingLabError):
    pass


class IsometryError(BicombingLabError):
    pass


class ExportError(BicombingLabError, OSError):
    pass
