"""Exception hierarchy shared across the package."""


class ParawaveError(Exception):
    """Base class for every error raised by parawave."""


class GridMismatch(ParawaveError, ValueError):
    pass


class NonHermitianMultiplier(ParawaveError, ValueError):
    pass


class SymbolUndefined(ParawaveError, ValueError):
    pass


class EllipticityViolation(ParawaveError, ValueError):
    pass


class DegenerateMap(ParawaveError, ValueError):
    """The flattening map has a non-positive vertical derivative somewhere."""

    def __init__(self, message, min_dz_rho=None):
        super().__init__(message)
        self.min_dz_rho = min_dz_rho


class SolverError(ParawaveError, RuntimeError):
    pass


class SolverDiverged(SolverError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class CflViolation(ParawaveError, ValueError):
    pass


class TaylorSignViolation(ParawaveError, RuntimeError):
    def __init__(self, message, min_a=None):
        super().__init__(message)
        self.min_a = min_a


class ConfigInvalid(ParawaveError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class GoldenMismatch(ParawaveError, AssertionError):
    def __init__(self, fields, message=None):
        self.fields = list(fields)
        super().__init__(message or "golden mismatch in fields: " + ", ".join(self.fields))
