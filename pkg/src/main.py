"""
Главный файл стенда устойчивости течения Тейлора–Куэтта
"""
import sys
from pathlib import Path

# Добавляем корневую директорию в sys.path
src_dir = Path(__file__).parent
if str(src_dir) not in sys.path:
    sys.path.insert(0, str(src_dir))

import argparse
import asyncio

from utils import config, log, setup_logger, run_context, TCStabilityError
from harness.handlers import COMMANDS
from harness.reports import REPORT_FORMATS

EXIT_INTERRUPTED = 130


def build_parser() -> argparse.ArgumentParser:
    """Парсер CLI: общие флаги и подкоманды"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='YAML-документ RunConfig (по умолчанию config.yaml)')
    common.add_argument('--seed', type=int, default=None, help='Зерно генератора')
    common.add_argument('--out', default=None, help='Каталог результатов')
    common.add_argument('--jobs', type=int, default=None, help='Ширина пула воркеров')
    common.add_argument('--format', choices=REPORT_FORMATS, default='ndjson', help='Формат отчета')

    parser = argparse.ArgumentParser(
        prog='tcstab',
        description='Спектральный стенд устойчивости течения Тейлора–Куэтта с плавучестью',
    )
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, parents=[common], help=COMMANDS[name].__doc__)
        if name == 'report':
            cmd.add_argument('input', help='NDJSON-файл с записями перебора')
    return parser


def main(argv=None) -> int:
    """Главная функция запуска"""
    args = build_parser().parse_args(argv)

    # LOG_LEVEL из окружения
    if config.settings.log_level.upper() != 'INFO':
        setup_logger(config.settings.log_level.upper())
    run_context(command=args.command)

    log.info("=" * 50)
    log.info(f"Запуск подкоманды {args.command}")
    log.info("=" * 50)

    return asyncio.run(COMMANDS[args.command](args))


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        log.info("Остановлено пользователем")
        sys.exit(EXIT_INTERRUPTED)
    except TCStabilityError as e:
        log.error(f"{type(e).__name__}: {e}")
        sys.exit(e.exit_code)
    except Exception as e:
        log.error(f"Критическая ошибка: {e}", exc_info=True)
        sys.exit(3)
