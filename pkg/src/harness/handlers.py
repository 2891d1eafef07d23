"""
Обработчики подкоманд CLI

Каждый обработчик получает разобранные аргументы и возвращает код выхода:
0 - успех, 3 - все точки перебора упали, 4 - проверка не дала
определенного ответа.
"""
import argparse
import json
from pathlib import Path
from typing import Any, Callable, Dict, List

from utils import log, run_context, PreconditionError
from harness.models import RunConfig, load_run_config
from harness.experiments import PLOT_FIELDS
from harness.sweeps import sweep_runner
from harness.scaling import fit_scaling, MIN_FIT_POINTS
from harness.threshold import threshold_scan
from harness.reports import emit_report, read_ndjson, write_ndjson, to_jsonable

EXIT_OK, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 3, 4

# Проверка отчета точки; False - проверка не пройдена
ACCEPTANCE: Dict[str, Callable[[Dict[str, Any]], bool]] = {
    'elliptic': lambda rep: rep['refinement_ok'],
    'accretivity': lambda rep: rep['resolvent_ok'],
    'semigroup': lambda rep: rep['all_ok'] and rep['margin_ok'],
    'decay': lambda rep: rep['within_gap_band'],
    'simulate': lambda rep: rep['outcome'] != 'inconclusive',
    'threshold': lambda rep: rep['status'] == 'ok',
}


def _load(args: argparse.Namespace, experiment: str) -> RunConfig:
    run_config = load_run_config(args.config, seed=args.seed, output_dir=args.out, jobs=args.jobs)
    run_config = run_config.model_copy(update={'experiment': experiment})
    run_context(config_hash=run_config.config_hash())
    return run_config


def _out_dir(args: argparse.Namespace, run_config: RunConfig) -> Path:
    return Path(args.out) if args.out else run_config.resolve_output_dir()


def _write_json(data: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(to_jsonable(data), f, ensure_ascii=False, indent=2)
    return path


def _summary(run_config: RunConfig, records: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Степенная регрессия основной величины по оси перебора (если точек достаточно)"""
    ok = [r for r in records if r['status'] == 'ok']
    summary: Dict[str, Any] = {
        'experiment': run_config.experiment,
        'config_hash': run_config.config_hash(),
        'points': len(records),
        'failed': len(records) - len(ok),
        'fit': None,
    }
    y_field = PLOT_FIELDS.get(run_config.experiment)
    if run_config.sweep.variable in ('nu', 'B', 'R', 'k') and y_field and len(ok) >= MIN_FIT_POINTS:
        try:
            summary['fit'] = fit_scaling(ok, 'value', y_field).model_dump(exclude={'points'})
        except PreconditionError as e:
            log.warning(f"Регрессия не выполнена: {e}")
    return summary


async def _run_experiment(args: argparse.Namespace, experiment: str) -> int:
    run_config = _load(args, experiment)
    records = await sweep_runner.run(run_config, jobs=args.jobs)
    out_dir = _out_dir(args, run_config)
    stem = f"{experiment}_{run_config.config_hash()[:12]}"

    path = write_ndjson(records, out_dir / f"{stem}.ndjson")
    print(path)
    if records and args.format != 'ndjson':
        for extra in emit_report(records, args.format, out_dir, stem):
            print(extra)
    summary = _summary(run_config, records)
    print(_write_json(summary, out_dir / f"{stem}.summary.json"))

    if records and summary['failed'] == len(records):
        log.error(f"Все {len(records)} точек перебора завершились ошибкой")
        return EXIT_NUMERICAL
    check = ACCEPTANCE.get(experiment)
    if check is not None:
        failed = [r['index'] for r in records if r['status'] == 'ok' and not check(r['report'])]
        if failed:
            log.warning(f"Проверка {experiment} не пройдена в точках {failed}")
            return EXIT_INCONCLUSIVE
    return EXIT_OK


async def grid_check_command(args: argparse.Namespace) -> int:
    """grid-check: квадратура и дифференцирование на сетке"""
    return await _run_experiment(args, 'grid')


async def elliptic_verify_command(args: argparse.Namespace) -> int:
    """elliptic-verify: эмпирические константы эллиптических оценок"""
    return await _run_experiment(args, 'elliptic')


async def resolvent_sweep_command(args: argparse.Namespace) -> int:
    """resolvent-sweep: наихудшие отношения резольвентных оценок"""
    return await _run_experiment(args, 'resolvent')


async def gap_command(args: argparse.Namespace) -> int:
    """gap: спектральная щель"""
    return await _run_experiment(args, 'gap')


async def accretivity_command(args: argparse.Namespace) -> int:
    return await _run_experiment(args, 'accretivity')


async def semigroup_bound_command(args: argparse.Namespace) -> int:
    return await _run_experiment(args, 'semigroup')


async def decay_command(args: argparse.Namespace) -> int:
    return await _run_experiment(args, 'decay')


async def spacetime_command(args: argparse.Namespace) -> int:
    return await _run_experiment(args, 'spacetime')


async def simulate_command(args: argparse.Namespace) -> int:
    """simulate: нелинейный эксперимент на устойчивость"""
    return await _run_experiment(args, 'simulate')


async def threshold_scan_command(args: argparse.Namespace) -> int:
    """threshold-scan: бисекция ε* по ν и показатель α"""
    run_config = _load(args, 'threshold')
    result = await threshold_scan(run_config, jobs=args.jobs)
    out_dir = _out_dir(args, run_config)
    path = _write_json(
        {'config_hash': run_config.config_hash(), **result.model_dump()},
        out_dir / f"threshold_{run_config.config_hash()[:12]}.json",
    )
    print(path)
    if result.fitted_alpha is not None:
        log.info(f"α = {result.fitted_alpha.slope:.4f} (r² = {result.fitted_alpha.r_squared:.4f})")
    return EXIT_INCONCLUSIVE if result.is_inconclusive else EXIT_OK


async def report_command(args: argparse.Namespace) -> int:
    """report: перевести готовый NDJSON в CSV или plotdata"""
    source = Path(args.input)
    if not source.exists():
        raise PreconditionError(f"Файл не найден: {source}")
    records = read_ndjson(source)
    out_dir = Path(args.out) if args.out else source.parent
    for path in emit_report(records, args.format, out_dir, source.stem):
        print(path)
    return EXIT_OK


async def config_schema_command(args: argparse.Namespace) -> int:
    """config-schema: JSON-схема документа конфигурации"""
    print(json.dumps(RunConfig.model_json_schema(), ensure_ascii=False, indent=2))
    return EXIT_OK


COMMANDS: Dict[str, Callable] = {
    'grid-check': grid_check_command,
    'elliptic-verify': elliptic_verify_command,
    'resolvent-sweep': resolvent_sweep_command,
    'gap': gap_command,
    'accretivity': accretivity_command,
    'semigroup-bound': semigroup_bound_command,
    'decay': decay_command,
    'spacetime': spacetime_command,
    'simulate': simulate_command,
    'threshold-scan': threshold_scan_command,
    'report': report_command,
    'config-schema': config_schema_command,
}
