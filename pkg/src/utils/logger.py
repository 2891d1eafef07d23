"""
Модуль логирования численного стенда

Каждая запись несет контекст запуска: подкоманду и префикс хэша
конфигурации (см. run_context).
"""
import sys
from loguru import logger
from pathlib import Path
from typing import Optional

NO_CONTEXT = '-'
HASH_PREFIX = 12
_context = {'command': NO_CONTEXT, 'config_hash': NO_CONTEXT}

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<magenta>{extra[command]}:{extra[config_hash]}</magenta> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)


def run_context(command: Optional[str] = None, config_hash: Optional[str] = None):
    """
    Задать контекст запуска для всех последующих записей

    Пустые значения оставляют текущий контекст без изменений.

    Args:
        command: Имя подкоманды CLI
        config_hash: Хэш RunConfig (в записи попадает префикс)
    """
    if command is not None:
        _context['command'] = command
    if config_hash is not None:
        _context['config_hash'] = config_hash[:HASH_PREFIX]
    logger.configure(extra=dict(_context))


def setup_logger(log_level: str = "INFO", log_dir: Optional[Path] = None):
    """
    Настройка логгера

    Args:
        log_level: Уровень логирования (DEBUG, INFO, WARNING, ERROR)
        log_dir: Каталог файлов логов (по умолчанию logs/ в корне проекта)
    """
    logger.remove()
    logger.configure(extra=dict(_context))

    log_dir = Path(log_dir) if log_dir else Path(__file__).parent.parent.parent / "logs"
    log_dir.mkdir(parents=True, exist_ok=True)

    # stdout занят путями к результатам
    logger.add(sys.stderr, format=LOG_FORMAT, level=log_level, colorize=True)

    logger.add(
        log_dir / "tcstab.log",
        format=LOG_FORMAT,
        level=log_level,
        rotation="10 MB",
        retention="7 days",
        compression="zip"
    )

    # Только ошибки
    logger.add(
        log_dir / "errors.log",
        format=LOG_FORMAT,
        level="ERROR",
        rotation="10 MB",
        retention="30 days",
        compression="zip"
    )

    return logger


# Глобальный логгер
log = setup_logger()
