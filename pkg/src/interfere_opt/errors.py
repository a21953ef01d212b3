"""Exception types raised across the package."""


class InterfereOptError(Exception):
    """Base class for all package errors."""


class InvalidInputError(InterfereOptError, ValueError):
    pass


class CapacityError(InterfereOptError, ValueError):
    pass


class InvalidCovarianceError(InvalidInputError):
    pass


class DegenerateMeasureError(InterfereOptError, ArithmeticError):
    """The measure carries no information on the direct effects (singular moments)."""


class ConvergenceError(InterfereOptError, RuntimeError):
    def __init__(self, message, theta_star=None, iterations=None):
        super().__init__(message)
        self.theta_star = theta_star
        self.iterations = iterations
