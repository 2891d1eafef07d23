"""Утилиты стенда: конфигурация, логирование, исключения"""
from .config import config, ConfigLoader, Settings
from .logger import log, setup_logger, run_context
from .errors import (
    TCStabilityError,
    ParameterDomainError,
    UsageError,
    ShapeMismatchError,
    PreconditionError,
    ConditioningError,
    NumericalFailure,
    InconclusiveResult,
)

__all__ = [
    'config', 'ConfigLoader', 'Settings', 'log', 'setup_logger', 'run_context',
    'TCStabilityError', 'ParameterDomainError', 'UsageError', 'ShapeMismatchError',
    'PreconditionError', 'ConditioningError', 'NumericalFailure', 'InconclusiveResult',
]
