from django.core.exceptions import ImproperlyConfigured


class ClothFoldingError(Exception):
    pass


class ParameterError(ClothFoldingError, ValueError):
    pass


class ConfigurationError(ClothFoldingError, ImproperlyConfigured):
    pass


class NumericError(ClothFoldingError, ArithmeticError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ProjectionError(ClothFoldingError, ValueError):
    pass


class ContractError(ClothFoldingError, ValueError):
    pass


class NotReadyError(ClothFoldingError):
    """Буфер еще не набрал достаточно данных, можно повторить позже."""
    retryable = True


class ExpertGenerationError(ClothFoldingError):
    pass


class IdentificationError(ClothFoldingError):
    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = list(failures or [])


class TrajectoryParseError(ClothFoldingError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class TrainingError(ClothFoldingError):
    pass
