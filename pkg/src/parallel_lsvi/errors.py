from typing import Optional, Tuple


class SimulatorError(Exception):
    pass


class ParameterError(SimulatorError, ValueError):
    pass


class FeatureBoundError(ParameterError):
    pass


class GenerationError(ParameterError):
    pass


class ConfigError(ParameterError):
    pass


class DatasetError(ParameterError):
    pass


class NumericError(SimulatorError, ArithmeticError):
    def __init__(self, message: str, location: Optional[Tuple[int, ...]] = None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class SolverError(NumericError):
    """Raised when a matrix game cannot be certified within tolerance.

    `residual` is the best exploitability reached before giving up.
    """

    def __init__(self, message: str, residual: float, location: Optional[Tuple[int, ...]] = None):
        super().__init__(f"{message}; residual={residual:.3e}", location=location)
        self.residual = residual


class ConsistencyError(SimulatorError, RuntimeError):
    pass


class ExperimentError(SimulatorError):
    def __init__(self, message: str, coordinates: dict):
        super().__init__(f"{message} at grid point {coordinates}")
        self.coordinates = coordinates
