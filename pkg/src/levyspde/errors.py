"""Exception hierarchy shared by all modules."""


class LevySPDEError(Exception):
    pass


class InvalidParameterError(LevySPDEError, ValueError):
    pass


class ModelViolationError(LevySPDEError, ValueError):
    """A configured model breaks one of the structural assumptions
    (F(0)=0, Phi nondecreasing, phi(0)=0, monotone/Lipschitz jumps)."""


class QuadratureError(LevySPDEError, ArithmeticError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class GeometryError(LevySPDEError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NewtonError(LevySPDEError, ArithmeticError):
    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class DivergenceError(LevySPDEError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class GridMismatchError(LevySPDEError, ValueError):
    pass


class ConfigError(LevySPDEError, ValueError):
    pass
