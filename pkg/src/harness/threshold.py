"""
Бисекция порога устойчивости по амплитуде и оценка показателя α

Амплитуда ε умножает начальные данные семейства, которые при ε = 1
выполняют условия малости с равенством. Размер данных при ε* равен
ε*·ε₀ν^{1/2}|B|^{1/2}R^{-2}; по нему по серии ν подбирается ε* ∝ ν^α.
"""
import asyncio
import math
from typing import Any, Callable, Dict, List, Optional, Tuple

from utils import log, InconclusiveResult
from harness.models import RunConfig, SweepPoint, ThresholdResult
from harness.scaling import fit_scaling
from spectral.models import FlowParams
from spectral.radial_grid import build_grid
from spectral.nonlinear_sim import (
    run_stability_experiment, smallness_conditions, initial_state, threshold_rhs, INIT_FAMILIES,
)

MAX_WIDENINGS = 3
WIDEN_FACTOR = 10.0

VerdictFn = Callable[[float], bool]


def bisect_amplitude(
    is_stable: VerdictFn,
    eps_range: Tuple[float, float],
    rel_width: float = 0.05,
    max_iter: int = 60,
) -> Dict[str, Any]:
    """
    Найти ε*, где вердикт переключается со stable на growth

    Концы проверяются до бисекции: если stable(lo) ложно, lo делится на 10,
    если stable(hi) истинно, hi умножается на 10 (до 3 раз каждый).
    Деление идет в логарифмической шкале до (hi − lo)/lo <= rel_width.

    Returns:
        Словарь: status ('ok' | 'inconclusive'), lo, hi, eps_star, bracket_width, evaluations
    """
    lo, hi = eps_range
    evaluations: List[Tuple[float, bool]] = []

    def check(eps: float) -> bool:
        verdict = bool(is_stable(eps))
        evaluations.append((eps, verdict))
        log.debug(f"ε = {eps:.4e}: {'stable' if verdict else 'growth'}")
        return verdict

    lo_ok = check(lo)
    for _ in range(MAX_WIDENINGS):
        if lo_ok:
            break
        lo /= WIDEN_FACTOR
        lo_ok = check(lo)
    hi_ok = check(hi)
    for _ in range(MAX_WIDENINGS):
        if not hi_ok:
            break
        hi *= WIDEN_FACTOR
        hi_ok = check(hi)

    if not lo_ok or hi_ok:
        log.warning(f"Переключение вердикта не найдено на [{lo:.3e}, {hi:.3e}]")
        return {
            'status': 'inconclusive',
            'lo': lo,
            'hi': hi,
            'eps_star': None,
            'bracket_width': None,
            'stable_at_lo': lo_ok,
            'stable_at_hi': hi_ok,
            'evaluations': evaluations,
        }

    for _ in range(max_iter):
        if (hi - lo) / lo <= rel_width:
            break
        mid = math.sqrt(lo * hi)
        if check(mid):
            lo = mid
        else:
            hi = mid

    return {
        'status': 'ok',
        'lo': lo,
        'hi': hi,
        'eps_star': math.sqrt(lo * hi),
        'bracket_width': (hi - lo) / lo,
        'evaluations': evaluations,
    }


def _conditions_at(params: FlowParams, point: SweepPoint, amplitude: float) -> Optional[Dict[str, Any]]:
    family = INIT_FAMILIES.get(point.options.init_family)
    if family is None:
        return None
    grid = build_grid(params.R, point.n)
    omega0, rho0 = family(params, grid, point.options.eps0, point.options.eps1)
    state = initial_state(amplitude * omega0, amplitude * rho0, params, grid)
    cond = smallness_conditions(state, params, point.options.eps0, point.options.eps1)
    return {key: cond[key] for key in ('cond1_lhs', 'cond1_rhs', 'cond1_ok', 'cond2_lhs', 'cond2_rhs', 'cond2_ok')}


def bisect_point(point: SweepPoint, run_config: RunConfig, is_stable: Optional[VerdictFn] = None) -> Dict[str, Any]:
    """Бисекция в одной точке перебора (по умолчанию вердикт нелинейного эксперимента)"""
    params, opts = point.params, point.options

    if is_stable is None:
        def is_stable(eps: float) -> bool:
            verdict, _ = run_stability_experiment(
                params,
                init_family=opts.init_family,
                amplitude=eps,
                horizon=opts.horizon,
                n=point.n,
                eps0=opts.eps0,
                eps1=opts.eps1,
                stability_factor=opts.stability_factor,
                dt=opts.dt,
            )
            return verdict.outcome == 'stable'

    result = bisect_amplitude(is_stable, opts.eps_range, opts.bisect_rel_width)
    size = threshold_rhs(params, opts.eps0, opts.eps1)['E']
    result['nu'] = params.nu
    result['eps_star_size'] = result['eps_star'] * size if result['eps_star'] is not None else None
    result['size_rhs'] = size
    result['sufficiency_ok'] = result['eps_star'] is not None and result['lo'] >= 1.0
    result['conditions_at_eps_star'] = _conditions_at(params, point, result['lo']) if result['status'] == 'ok' else None
    result['evaluations'] = [[eps, ok] for eps, ok in result['evaluations']]
    log.info(f"Порог при nu={params.nu}: {result['status']}, ε* = {result['eps_star']}")
    return result


def threshold_from_records(records: List[Dict[str, Any]]) -> ThresholdResult:
    """Собрать ThresholdResult из записей перебора по ν"""
    result = ThresholdResult()
    for record in sorted(records, key=lambda r: r['index']):
        report = record.get('report') or {}
        nu = report.get('nu', record.get('value'))
        result.nu_values.append(nu)
        if record.get('status') != 'ok' or report.get('status') != 'ok':
            result.eps_star.append(None)
            result.bracket_width.append(None)
            result.brackets.append(None)
            result.conditions_at_eps_star.append(None)
            result.inconclusive.append({'nu': nu, 'record': report or record.get('error')})
            continue
        result.eps_star.append(report['eps_star'])
        result.bracket_width.append(report['bracket_width'])
        result.brackets.append((report['lo'], report['hi']))
        result.conditions_at_eps_star.append(report.get('conditions_at_eps_star'))

    points = [
        {'nu': nu, 'eps_star': r['report']['eps_star'], 'eps_star_size': r['report']['eps_star_size']}
        for nu, r in zip(result.nu_values, sorted(records, key=lambda r: r['index']))
        if r.get('status') == 'ok' and (r.get('report') or {}).get('status') == 'ok'
    ]
    if len({p['nu'] for p in points}) >= 4:
        result.fitted_alpha = fit_scaling(points, 'nu', 'eps_star')
        result.fitted_alpha_size = fit_scaling(points, 'nu', 'eps_star_size')
    else:
        log.warning("Меньше 4 значений ν с найденным порогом: α не оценивается")
    return result


async def threshold_scan(
    run_config: RunConfig,
    eps_range: Optional[Tuple[float, float]] = None,
    is_stable: Optional[Callable[[FlowParams, float], bool]] = None,
    jobs: Optional[int] = None,
) -> ThresholdResult:
    """
    Порог ε* для каждого ν из перебора и показатель α

    Args:
        run_config: Конфигурация (перебор по nu)
        eps_range: Начальная вилка по амплитуде; по умолчанию options.eps_range
        is_stable: Вердикт (params, ε) -> bool вместо нелинейного эксперимента
        jobs: Ширина пула

    Returns:
        ThresholdResult; при отсутствии переключения хотя бы в одной точке
        список inconclusive непуст
    """
    from harness.sweeps import sweep_runner

    run_config = run_config.model_copy(update={'experiment': 'threshold'})
    if eps_range is not None:
        run_config = run_config.model_copy(
            update={'options': run_config.options.model_copy(update={'eps_range': tuple(eps_range)})}
        )

    runner = None
    if is_stable is not None:
        def runner(point: SweepPoint, cfg: RunConfig) -> Dict[str, Any]:
            return bisect_point(point, cfg, lambda eps: is_stable(point.params, eps))

    records = await sweep_runner.run(run_config, runner=runner, jobs=jobs)
    result = threshold_from_records(records)
    if result.is_inconclusive:
        log.warning(f"Порог не найден для {len(result.inconclusive)} значений ν")
    return result


def threshold_bisect(
    run_config: RunConfig,
    eps_range: Optional[Tuple[float, float]] = None,
    is_stable: Optional[Callable[[FlowParams, float], bool]] = None,
    jobs: Optional[int] = None,
) -> ThresholdResult:
    """Синхронная обертка threshold_scan"""
    return asyncio.run(threshold_scan(run_config, eps_range, is_stable, jobs))


def require_conclusive(result: ThresholdResult) -> ThresholdResult:
    """Поднять InconclusiveResult, если переключение не найдено"""
    if result.is_inconclusive:
        raise InconclusiveResult(f"Вердикт не переключается для ν = {[item['nu'] for item in result.inconclusive]}")
    return result
