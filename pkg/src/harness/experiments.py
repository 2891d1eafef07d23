"""
Реестр экспериментов

Каждый эксперимент получает точку перебора (параметры с примененным
значением) и возвращает словарь-отчет. Эксперименты не пишут в общий
стейт: сетки и операторы кэшируются и не изменяются.
"""
import math
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np

from utils import log, UsageError
from harness.models import RunConfig, SweepPoint
from spectral.models import FlowParams, ModeField, ForcingSpec, WeightParams
from spectral.radial_grid import build_grid, l2_norm, norms, random_dirichlet_field
from spectral.stability_analysis import (
    spectral_gap, check_accretivity, semigroup_bound_check, verify_elliptic_lemmas, verify_prop41,
    MIN_ELLIPTIC_TRIALS, MIN_ACCRETIVITY_TRIALS,
)
from spectral.linear_evolution import (
    measure_decay_rate, verify_spacetime_vorticity, verify_spacetime_temperature, default_weight,
)
from spectral.nonlinear_sim import run_stability_experiment

ExperimentFn = Callable[[SweepPoint, RunConfig], Dict[str, Any]]


def apply_sweep_value(run_config: RunConfig, index: int, value: Optional[float], seed: int) -> SweepPoint:
    """Подставить значение оси перебора в параметры или опции"""
    params = run_config.params
    options = run_config.options
    variable = run_config.sweep.variable
    if value is not None:
        if variable in ('nu', 'B', 'R'):
            params = params.with_updates(**{variable: float(value)})
        elif variable == 'k':
            options = options.model_copy(update={'k': int(value)})
        elif variable == 'epsilon':
            options = options.model_copy(update={'amplitude': float(value)})
    return SweepPoint(index=index, value=value, params=params, n=run_config.grid.n, options=options, seed=seed)


def _random_init(point: SweepPoint) -> ModeField:
    grid = build_grid(point.params.R, point.n)
    rng = np.random.default_rng(point.seed)
    return ModeField(k=point.options.k, values=random_dirichlet_field(grid, rng), rep='weighted', grid=grid)


def run_grid(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Самопроверка сетки: квадратура и производная на гладких профилях"""
    R, n = point.params.R, point.n
    grid = build_grid(R, n)
    r = grid.nodes
    s = (r - 1.0) / (R - 1.0)
    f = np.sin(np.pi * s)
    df = np.pi / (R - 1.0) * np.cos(np.pi * s)
    report = norms(f, grid)
    return {
        'R': R,
        'n': n,
        'min_spacing': float(np.min(np.diff(r))),
        'weight_sum_error': float(abs(grid.quad_weights.sum() - (R - 1.0))),
        'cubic_moment_error': float(abs(grid.quad_weights @ r ** 3 - (R ** 4 - 1.0) / 4.0)),
        'deriv_error': float(np.max(np.abs(grid.deriv @ f - df))),
        'sine_l2_error': float(abs(report.l2 - math.sqrt((R - 1.0) / 2.0))),
        'norms': report.model_dump(),
    }


def run_elliptic(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Эллиптические константы на n и 2n с относительным изменением"""
    trials = max(point.options.trials, MIN_ELLIPTIC_TRIALS)
    k_list = point.options.k_list
    base = verify_elliptic_lemmas(build_grid(point.params.R, point.n), k_list, trials=trials, seed=point.seed)
    fine = verify_elliptic_lemmas(build_grid(point.params.R, 2 * point.n), k_list, trials=trials, seed=point.seed)
    change = {
        name: abs(fine['constants'].get(name, 0.0) - value) / value
        for name, value in base['constants'].items() if value > 0
    }
    tol = run_config.tolerance('elliptic_refinement', 0.05)
    return {
        'R': point.params.R,
        'n': point.n,
        'constants': base['constants'],
        'constants_refined': fine['constants'],
        'relative_change': change,
        'refinement_ok': all(v < tol for v in change.values()),
        'per_k': base['per_k'],
        'samples': base['samples'],
        'skipped': base['skipped'],
    }


def run_resolvent(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Наихудшие отношения четырех резольвентных оценок при данном ν"""
    result = verify_prop41([point.params], point.options.k, trials=point.options.trials, n=point.n, seed=point.seed)
    item = result['per_nu'][0]
    return {'k': point.options.k, 'nu': point.params.nu, 'ratios': item['ratios']}


def run_gap(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Спектральная щель Ψ и ее отношение к масштабу (νk²)^{1/3}|B|^{2/3}R^{-2}"""
    k = point.options.k
    gap = spectral_gap(point.params, k, lambda_steps=point.options.lambda_steps, n=point.n)
    rate = point.params.enhanced_rate(k)
    return {
        'k': k,
        'nu': point.params.nu,
        'psi': gap.psi,
        'argmin_lambda': gap.argmin_lambda,
        'range_warning': gap.range_warning,
        'enhanced_rate': rate,
        'gap_constant': gap.psi / rate if rate > 0 else None,
    }


def run_accretivity(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    trials = max(point.options.trials, MIN_ACCRETIVITY_TRIALS)
    return check_accretivity(point.params, point.options.k, trials=trials, n=point.n, seed=point.seed)


def run_semigroup(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    report = semigroup_bound_check(point.params, point.options.k, point.options.t_grid, n=point.n)
    margin = run_config.tolerance('semigroup_margin', 1.0e-8)
    report['margin_ok'] = all(e['margin'] >= margin for e in report['entries'])
    report['nu'] = point.params.nu
    return report


def run_decay(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Скорость затухания случайного начального поля"""
    init = _random_init(point)
    return measure_decay_rate(
        point.params, point.options.k, init, horizon=point.options.horizon, n=point.n, dt=point.options.dt,
    )


def _smooth_forcing(point: SweepPoint) -> ForcingSpec:
    """h₁ = e^{-t}·sin, h₂ = e^{-t}·sin, g = 1/r"""
    grid = build_grid(point.params.R, point.n)
    r = grid.nodes
    bump = np.sin(np.pi * (r - 1.0) / (point.params.R - 1.0))
    return ForcingSpec(
        h1=lambda t: math.exp(-t) * bump,
        h2=lambda t: math.exp(-t) * bump,
        g=1.0 / r,
        g_prime=-1.0 / r ** 2,
    )


def run_spacetime(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Пространственно-временные оценки для завихренности и температуры"""
    params, k = point.params, point.options.k
    init = _random_init(point)
    weight = default_weight(params, k, n=point.n) if point.options.weighted else WeightParams()
    forcing = _smooth_forcing(point) if point.options.forced else None
    kwargs = dict(forcing=forcing, weight=weight, horizon=point.options.horizon, dt=point.options.dt,
                  regime=point.options.regime)
    vorticity = verify_spacetime_vorticity(params, k, init, **kwargs)
    temperature = verify_spacetime_temperature(params, k, init, **kwargs)
    vorticity.pop('ledger', None)
    temperature.pop('ledgers', None)
    return {
        'k': k,
        'nu': params.nu,
        'regime': vorticity['regime'],
        'c_prime': weight.c_prime,
        'ratio': vorticity['ratio'],
        'vorticity': vorticity,
        'temperature': temperature,
    }


def run_simulate(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Нелинейный эксперимент на устойчивость с временным рядом энергий"""
    opts = point.options
    energy_csv = Path(run_config.resolve_output_dir()) / f"energy_{point.index:03d}.csv"
    verdict, ledger = run_stability_experiment(
        point.params,
        init_family=opts.init_family,
        amplitude=opts.amplitude,
        horizon=opts.horizon,
        n=point.n,
        eps0=opts.eps0,
        eps1=opts.eps1,
        stability_factor=opts.stability_factor,
        dt=opts.dt,
        energy_csv=str(energy_csv),
    )
    return {
        'nu': point.params.nu,
        'amplitude': opts.amplitude,
        'outcome': verdict.outcome,
        'sup_energy_ratio': verdict.sup_energy_ratio,
        'horizon_reached': verdict.horizon_reached,
        'blowup': verdict.blowup,
        'hypothesis_held': verdict.hypothesis_held,
        'nonzero_decay_rate': verdict.nonzero_decay_rate,
        'required_decay_rate': verdict.required_decay_rate,
        'decay_rate_ok': verdict.decay_rate_ok,
        'conditions': verdict.conditions,
        'ledger': ledger.to_dict(),
    }


def run_threshold(point: SweepPoint, run_config: RunConfig) -> Dict[str, Any]:
    """Бисекция критической амплитуды при данном ν"""
    from harness.threshold import bisect_point
    return bisect_point(point, run_config)


EXPERIMENTS: Dict[str, ExperimentFn] = {
    'grid': run_grid,
    'elliptic': run_elliptic,
    'resolvent': run_resolvent,
    'gap': run_gap,
    'accretivity': run_accretivity,
    'semigroup': run_semigroup,
    'decay': run_decay,
    'spacetime': run_spacetime,
    'simulate': run_simulate,
    'threshold': run_threshold,
}

# Поле отчета, откладываемое по оси y в plotdata
PLOT_FIELDS: Dict[str, str] = {
    'grid': 'report.deriv_error',
    'elliptic': 'report.constants.energy_upper',
    'resolvent': 'report.ratios.vorticity',
    'gap': 'report.psi',
    'accretivity': 'report.min_normalized_real_part',
    'semigroup': 'report.psi',
    'decay': 'report.rate',
    'spacetime': 'report.ratio',
    'simulate': 'report.sup_energy_ratio',
    'threshold': 'report.eps_star',
}


def get_experiment(name: str) -> ExperimentFn:
    """Найти эксперимент по имени"""
    fn = EXPERIMENTS.get(name)
    if fn is None:
        log.error(f"Неизвестный эксперимент: {name}")
        raise UsageError(f"Неизвестный эксперимент: {name}. Доступные: {', '.join(EXPERIMENTS)}")
    return fn
