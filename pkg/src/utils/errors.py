"""
Иерархия исключений стенда

Каждое исключение несет код выхода CLI:
2 - ошибка использования, 3 - численный сбой, 4 - неубедительный результат.
"""


class TCStabilityError(Exception):
    """Базовое исключение стенда"""
    exit_code: int = 3


class ParameterDomainError(TCStabilityError, ValueError):
    """Параметр вне допустимой области (R <= 1, n < 8, dt <= 0 ...)"""
    exit_code = 2


class UsageError(TCStabilityError):
    """Неверный конфиг или неизвестный эксперимент"""
    exit_code = 2


class ShapeMismatchError(TCStabilityError, ValueError):
    """Поля заданы на разных сетках"""
    exit_code = 2


class PreconditionError(TCStabilityError):
    """Нарушено предусловие операции"""
    exit_code = 2


class ConditioningError(TCStabilityError):
    """Вырожденная или плохо обусловленная система"""
    exit_code = 3


class NumericalFailure(TCStabilityError):
    """Прочие численные сбои (переполнение, NaN)"""
    exit_code = 3


class InconclusiveResult(TCStabilityError):
    """Проверка не дала определенного ответа"""
    exit_code = 4
