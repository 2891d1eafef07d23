"""
Численная проверка функционально-аналитических оценок

Эллиптические оценки для функции тока, резольвентные оценки для
модифицированного уравнения Орра–Зоммерфельда, спектральная щель Ψ,
m-аккретивность 𝓛_ν и оценка полугруппы ‖e^{−t𝓛}‖ ≤ e^{−tΨ+π/2}.

Все операторные нормы считаются в геометрии, взвешенной квадратурой:
матрица W^{-1/2}(A + shift·W)W^{-1/2} (см. OperatorBundle.weighted).
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple, Any

import numpy as np
from scipy.linalg import svdvals, expm, solve, norm as matrix_norm, LinAlgError, cho_solve
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

from utils import log, ParameterDomainError, PreconditionError, ConditioningError, NumericalFailure
from spectral.models import (
    FlowParams, RadialGrid, ModeField, OperatorBundle,
    ResolventSample, SpectralGapResult, ScalingFit,
)
from spectral.radial_grid import (
    l2_norm, h1r_norm, h1r_dual_norm, h1r_gram, inner_product, random_dirichlet_field,
)
from spectral.mode_operators import get_bundle, assemble_Lnu, assemble_zero_mode, solve_elliptic

ESTIMATES = ('vorticity', 'stream', 'vorticity_dual', 'stream_dual')
ELLIPTIC_BOUNDS = ('energy_lower', 'energy_upper', 'energy_l1', 'linf', 'axisymmetric_linf')

MIN_LAMBDA_STEPS = 64
MIN_ELLIPTIC_TRIALS = 10
MIN_ACCRETIVITY_TRIALS = 50
MAX_EXPONENT = 1.0e8


def power_law_fit(x: Sequence[float], y: Sequence[float]) -> ScalingFit:
    """
    Регрессия log y = slope·log x + intercept

    Args:
        x: Значения параметра (> 0)
        y: Измеренные величины (> 0)

    Returns:
        ScalingFit
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2 or not np.all(np.isfinite(lx)) or not np.all(np.isfinite(ly)):
        raise ParameterDomainError("Для степенной регрессии нужно >= 2 положительных точек")
    fit = linregress(lx, ly)
    r2 = float(fit.rvalue ** 2) if np.isfinite(fit.rvalue) else 1.0
    return ScalingFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=min(max(r2, 0.0), 1.0),
        points=[(float(a), float(b)) for a, b in zip(lx, ly)],
    )


def sigma_min(bundle: OperatorBundle, lam: float) -> float:
    """Наименьшее сингулярное число (𝓛_ν − iλ) во взвешенной геометрии"""
    return float(svdvals(bundle.weighted(-1j * lam))[-1])


def skew_range(params: FlowParams, k: int) -> Tuple[float, float]:
    """Область значений kB/r² на [1, R]"""
    a, b = k * params.B / params.R ** 2, k * params.B
    return min(a, b), max(a, b)


def default_lambda_range(params: FlowParams, k: int) -> Tuple[float, float]:
    """
    Область kB/r², расширенная на 10% ширины с каждой стороны

    Итоговый отрезок на 20% шире [min kB/r², max kB/r²]; отрезок, не
    покрывающий эту область целиком, вызывает предупреждение в spectral_gap.
    """
    lo, hi = skew_range(params, k)
    margin = 0.1 * (hi - lo) + 1.0e-6 * (1.0 + abs(k * params.B))
    return lo - margin, hi + margin


def spectral_gap(
    params: FlowParams,
    k: int,
    lambda_range: Optional[Tuple[float, float]] = None,
    lambda_steps: int = 129,
    n: int = 64,
) -> SpectralGapResult:
    """
    Спектральная щель Ψ = inf_λ σ_min(𝓛_ν − iλ)

    Минимум по равномерной сетке λ уточняется одномерной минимизацией
    между соседями узла-минимума. Концы области kB/r² проверяются всегда.

    Args:
        params: Параметры течения
        k: Азимутальное число (!= 0)
        lambda_range: Отрезок поиска; по умолчанию default_lambda_range
        lambda_steps: Число узлов сетки (>= 64)
        n: Число радиальных узлов

    Returns:
        SpectralGapResult
    """
    if lambda_steps < MIN_LAMBDA_STEPS:
        raise ParameterDomainError(f"lambda_steps должно быть >= {MIN_LAMBDA_STEPS}, получено {lambda_steps}")
    if k == 0:
        raise PreconditionError("Спектральная щель определена только для k != 0")

    bundle = get_bundle(params, k, n)
    lo_skew, hi_skew = skew_range(params, k)
    if lambda_range is None:
        lambda_range = default_lambda_range(params, k)
    lo, hi = float(min(lambda_range)), float(max(lambda_range))
    warning = lo > lo_skew or hi < hi_skew
    if warning:
        log.warning(f"Отрезок λ [{lo}, {hi}] не покрывает [{lo_skew}, {hi_skew}] (k={k})")

    lambdas = np.linspace(lo, hi, lambda_steps)
    values = np.array([sigma_min(bundle, lam) for lam in lambdas])
    j = int(np.argmin(values))
    grid_min = float(values[j])

    best_lam, best_val = float(lambdas[j]), grid_min
    left, right = lambdas[max(j - 1, 0)], lambdas[min(j + 1, lambda_steps - 1)]
    if right > left:
        res = minimize_scalar(
            lambda lam: sigma_min(bundle, lam),
            bounds=(left, right),
            method='bounded',
            options={'xatol': 1.0e-10 * (1.0 + abs(best_lam))},
        )
        if res.success and res.fun < best_val:
            best_lam, best_val = float(res.x), float(res.fun)

    for lam in (lo_skew, hi_skew):
        val = sigma_min(bundle, lam)
        if val < best_val:
            best_lam, best_val = float(lam), val

    log.debug(f"Ψ(k={k}, nu={params.nu}) = {best_val:.6e} при λ = {best_lam:.6f}")
    return SpectralGapResult(
        psi=max(best_val, 0.0),
        argmin_lambda=best_lam,
        lambda_lo=lo,
        lambda_hi=hi,
        lambda_steps=lambda_steps,
        grid_min=grid_min,
        range_warning=warning,
    )


def empirical_gap_constant(params: FlowParams, k: int, n: int = 64, gap: Optional[SpectralGapResult] = None) -> float:
    """Отношение Ψ / ((νk²)^{1/3}|B|^{2/3}R^{-2}) - эмпирическая константа c"""
    if params.B == 0:
        raise PreconditionError("Константа усиленной диссипации не определена при B = 0")
    gap = gap or spectral_gap(params, k, n=n)
    return gap.psi / params.enhanced_rate(k)


def check_accretivity(
    params: FlowParams,
    k: int,
    trials: int = MIN_ACCRETIVITY_TRIALS,
    n: int = 64,
    seed: int = 0,
    lambdas: Sequence[complex] = (0.1, 1.0, 10.0),
    random_lambdas: int = 10,
) -> Dict[str, Any]:
    """
    Проверка m-аккретивности 𝓛_ν

    Args:
        params: Параметры течения
        k: Азимутальное число (!= 0)
        trials: Число случайных полей (>= 50)
        n: Число радиальных узлов
        seed: Зерно генератора
        lambdas: Фиксированные λ для резольвентной проверки
        random_lambdas: Сколько случайных λ с Re λ > 0 добавить

    Returns:
        Словарь: min_normalized_real_part, max_identity_residual, resolvent (список), resolvent_ok
    """
    if trials < MIN_ACCRETIVITY_TRIALS:
        raise ParameterDomainError(f"trials должно быть >= {MIN_ACCRETIVITY_TRIALS}, получено {trials}")
    if k == 0:
        raise PreconditionError("Проверка аккретивности выполняется для k != 0")

    rng = np.random.default_rng(seed)
    bundle = get_bundle(params, k, n)
    grid = bundle.grid
    r = grid.nodes
    shift = k * k - 0.25

    min_real = math.inf
    max_residual = 0.0
    for _ in range(trials):
        f = random_dirichlet_field(grid, rng)
        energy = l2_norm(f, grid) ** 2
        if energy == 0.0:
            continue
        real_part = inner_product(bundle.apply(f), f, grid).real
        min_real = min(min_real, real_part / energy)
        form = params.nu * (l2_norm(grid.deriv @ f, grid) ** 2 + shift * l2_norm(f / r, grid) ** 2)
        scale = h1r_norm(f, grid) ** 2
        max_residual = max(max_residual, abs(real_part - form) / scale)

    samples = [complex(lam) for lam in lambdas]
    for _ in range(random_lambdas):
        samples.append(complex(10.0 ** rng.uniform(-2, 2), rng.uniform(-10, 10)))

    resolvent = []
    for lam in samples:
        if lam.real <= 0:
            raise ParameterDomainError(f"Re λ должно быть > 0, получено {lam}")
        smallest = float(svdvals(bundle.weighted(lam))[-1])
        op_norm = 1.0 / smallest
        bound = 1.0 / lam.real
        resolvent.append({
            'lambda_re': lam.real,
            'lambda_im': lam.imag,
            'norm': op_norm,
            'bound': bound,
            'ok': op_norm <= bound * (1.0 + 1.0e-8),
        })

    ok = all(item['ok'] for item in resolvent)
    log.info(f"Аккретивность k={k}: min Re⟨𝓛f,f⟩/‖f‖² = {min_real:.3e}, резольвента {'OK' if ok else 'НАРУШЕНА'}")
    return {
        'k': k,
        'trials': trials,
        'min_normalized_real_part': float(min_real),
        'max_identity_residual': float(max_residual),
        'resolvent': resolvent,
        'resolvent_ok': ok,
    }


def semigroup_bound_check(
    params: FlowParams,
    k: int,
    t_grid: Sequence[float],
    n: int = 64,
    gap: Optional[SpectralGapResult] = None,
) -> Dict[str, Any]:
    """
    Сравнение ‖e^{−t𝓛}‖ с e^{−tΨ+π/2} в точках t_grid

    Слишком большие t (t·‖𝓛‖ > 1e8) обрезаются с предупреждением.
    """
    bundle = get_bundle(params, k, n)
    gap = gap or spectral_gap(params, k, n=n)
    L_sim = bundle.weighted()
    op_size = float(matrix_norm(L_sim, 2))

    entries = []
    clamped = False
    for t in t_grid:
        t = float(t)
        if t < 0:
            raise ParameterDomainError(f"t должно быть >= 0, получено {t}")
        if t * op_size > MAX_EXPONENT:
            log.warning(f"t={t} обрезано до {MAX_EXPONENT / op_size:.3e} (t·‖𝓛‖ > {MAX_EXPONENT:.0e})")
            t = MAX_EXPONENT / op_size
            clamped = True
        propagator = expm(-t * L_sim)
        if not np.all(np.isfinite(propagator)):
            raise NumericalFailure(f"expm дал неконечные значения при t={t:.3e} (k={k})")
        value = float(matrix_norm(propagator, 2))
        bound = math.exp(-t * gap.psi + math.pi / 2)
        entries.append({
            't': t,
            'norm': value,
            'bound': bound,
            'margin': bound - value,
            'ratio': bound / value if value > 0 else math.inf,
            'ok': value <= bound,
        })

    return {
        'k': k,
        'psi': gap.psi,
        'entries': entries,
        'clamped': clamped,
        'all_ok': all(e['ok'] for e in entries),
    }


def solve_resolvent(
    params: FlowParams,
    k: int,
    lam: float,
    F: ModeField,
    bundle: Optional[OperatorBundle] = None,
) -> Tuple[ModeField, ModeField]:
    """
    Решить (𝓛_ν − ikBλ)ω = F с ω(1) = ω(R) = 0 и найти φ

    Args:
        params: Параметры течения
        k: Азимутальное число (!= 0)
        lam: Спектральный параметр λ
        F: Правая часть на сетке
        bundle: Готовые операторы моды (по умолчанию из кэша)

    Returns:
        (ω, φ) в представлении weighted
    """
    if k == 0:
        raise PreconditionError("Резольвентная задача ставится для k != 0")
    bundle = bundle or get_bundle(params, k, F.grid.n)
    grid = bundle.grid
    if not grid.same_as(F.grid):
        raise PreconditionError("Сетка F не совпадает с сеткой операторов")

    I = grid.interior
    matrix = bundle.stiffness - 1j * k * params.B * lam * np.diag(bundle.mass)
    try:
        inner = solve(matrix, bundle.mass * F.values[I])
    except LinAlgError as e:
        raise ConditioningError(f"Резольвентная система вырождена (k={k}, λ={lam}): {e}")
    omega = np.zeros(grid.n, dtype=complex)
    omega[I] = inner
    phi = solve_elliptic(omega, bundle)
    return (
        ModeField(k=k, values=omega, rep='weighted', grid=grid),
        ModeField(k=k, values=phi, rep='weighted', grid=grid),
    )


def elliptic_ratios(omega: np.ndarray, bundle: OperatorBundle) -> Optional[Dict[str, float]]:
    """
    Отношения левых частей эллиптических оценок к правым для одного ω

    Для k != 0 - три оценки (энергетическая с двух сторон, через L¹ и L^∞),
    для k = 0 - оценка ‖φ′‖_∞. None, если ω = 0.
    """
    grid = bundle.grid
    r = grid.nodes
    R = grid.R
    k = abs(bundle.k)
    if not np.any(omega):
        return None
    phi = solve_elliptic(omega, bundle)
    dphi = grid.deriv @ phi
    geom = math.sqrt(R / (R - 1.0))

    if k == 0:
        rhs = geom * (1.0 + math.log(R)) * l2_norm(r ** 1.5 * omega, grid)
        return {'axisymmetric_linf': float(np.max(np.abs(dphi))) / rhs}

    energy = l2_norm(dphi, grid) ** 2 + k * k * l2_norm(phi / r, grid) ** 2
    pairing = abs(inner_product(omega, phi, grid))
    l1 = float(np.sum(grid.quad_weights * np.abs(np.sqrt(r) * omega)))
    linf = float(np.max(np.abs(np.sqrt(r) * dphi))) + k * float(np.max(np.abs(phi / np.sqrt(r))))
    return {
        'energy_lower': energy / pairing if pairing > 0 else math.inf,
        'energy_upper': pairing / (l2_norm(r * omega, grid) ** 2 / k ** 2),
        'energy_l1': energy / (l1 ** 2 / k),
        'linf': linf / (geom * k ** -0.5 * l2_norm(r * omega, grid)),
    }


def verify_elliptic_lemmas(
    grid: RadialGrid,
    k_list: Sequence[int],
    trials: int = MIN_ELLIPTIC_TRIALS,
    seed: int = 0,
    fields: Optional[Sequence[np.ndarray]] = None,
) -> Dict[str, Any]:
    """
    Эмпирические константы эллиптических оценок

    Args:
        grid: Радиальная сетка
        k_list: Моды (k = 0 проверяется осесимметричной оценкой)
        trials: Число случайных ω на моду (>= 10)
        seed: Зерно генератора
        fields: Явные ω вместо случайных (тогда trials не используется)

    Returns:
        Словарь: per_k (максимумы отношений), constants (максимум по k), samples, skipped
    """
    if fields is None and trials < MIN_ELLIPTIC_TRIALS:
        raise ParameterDomainError(f"trials должно быть >= {MIN_ELLIPTIC_TRIALS}, получено {trials}")
    if not k_list:
        raise ParameterDomainError("Пустой список мод")

    rng = np.random.default_rng(seed)
    params = FlowParams(R=grid.R)
    per_k: Dict[int, Dict[str, float]] = {}
    samples = skipped = 0

    for k in k_list:
        bundle = assemble_zero_mode(params, grid) if k == 0 else assemble_Lnu(params, k, grid)
        omegas = list(fields) if fields is not None else [random_dirichlet_field(grid, rng) for _ in range(trials)]
        worst: Dict[str, float] = {}
        for omega in omegas:
            ratios = elliptic_ratios(np.asarray(omega, dtype=complex), bundle)
            if ratios is None:
                skipped += 1
                continue
            samples += 1
            for name, value in ratios.items():
                worst[name] = max(worst.get(name, 0.0), value)
        per_k[int(k)] = worst

    constants: Dict[str, float] = {}
    for worst in per_k.values():
        for name, value in worst.items():
            constants[name] = max(constants.get(name, 0.0), value)

    log.info(f"Эллиптические оценки: {samples} образцов, пропущено {skipped}, константы {constants}")
    return {'per_k': per_k, 'constants': constants, 'samples': samples, 'skipped': skipped}


def resolvent_lambda_grid(R: float, steps: int = 17) -> np.ndarray:
    """Сетка λ, покрывающая критический слой 1/r² ∈ [1/R², 1] с запасом 10%"""
    lo, hi = 1.0 / R ** 2, 1.0
    delta = 0.1 * (hi - lo)
    return np.linspace(lo - delta, hi + delta, steps)


class _ResolventNorms:
    """Матрицы норм на внутренних узлах для оценок резольвенты"""

    def __init__(self, bundle: OperatorBundle):
        grid = bundle.grid
        I = grid.interior
        w = grid.quad_weights
        self.grid = grid
        self.sw = np.sqrt(w[I])
        self.rI = grid.nodes[I]
        self.DI = np.sqrt(w)[:, None] * grid.deriv[:, I]
        self.mass = bundle.mass
        # Δ_k^{-1}: ω_I -> φ_I
        self.stream = -cho_solve(bundle.elliptic_factor, np.diag(bundle.mass))
        # ‖f‖²_{H¹_r} = ‖U f‖², ‖F‖_{H^{-1}} = ‖U^{-T} W F‖
        self.upper = np.linalg.cholesky(np.asarray(h1r_gram(grid.R, grid.n))).T

    def l2(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(self.sw * v))

    def deriv(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(self.DI @ v))

    def over_r(self, v: np.ndarray) -> float:
        return self.l2(v / self.rI)

    def h1(self, v: np.ndarray) -> float:
        return float(np.linalg.norm(self.upper @ v))

    def dual(self, F: np.ndarray) -> float:
        full = np.zeros(self.grid.n, dtype=complex)
        full[self.grid.interior] = F
        return h1r_dual_norm(full, self.grid)

    def extremal_forcings(self, T: np.ndarray) -> List[np.ndarray]:
        """Правые сингулярные векторы отображений F -> (ω, φ) в нормах оценок"""
        P = self.stream @ T
        outputs = [self.DI @ T, (self.sw / self.rI)[:, None] * T, self.DI @ P, (self.sw / self.rI)[:, None] * P]
        to_weighted = 1.0 / (self.sw * self.rI)
        to_dual = (self.upper.T / self.mass[:, None])
        forcings = []
        for out in outputs:
            _, _, vh = np.linalg.svd(out * to_weighted[None, :])
            forcings.append(to_weighted * vh[0].conj())
        for out in [self.upper @ T] + outputs[1:]:
            _, _, vh = np.linalg.svd(out @ to_dual)
            forcings.append(to_dual @ vh[0].conj())
        return forcings


def _resolvent_sample(
    params: FlowParams, k: int, lam: float, F: np.ndarray, T: np.ndarray, nrm: _ResolventNorms,
) -> Optional[ResolventSample]:
    omega = T @ F
    phi = nrm.stream @ omega
    rF = nrm.l2(nrm.rI * F)
    Fd = nrm.dual(F)
    if rF == 0.0 or Fd == 0.0:
        return None

    nu, R = params.nu, params.R
    kB = abs(k * params.B)
    ak = abs(k)
    d_om, om_r = nrm.deriv(omega), nrm.over_r(omega)
    d_phi, phi_r = nrm.deriv(phi), nrm.over_r(phi)
    h1_om = nrm.h1(omega)

    est1 = (nu ** (2 / 3) * kB ** (1 / 3) * d_om + nu ** (1 / 3) * kB ** (2 / 3) * om_r) / rF
    stream_factor = R ** 2 * ((nu / kB) ** (1 / 6) * math.sqrt(math.log(R)) + 1.0)
    est2 = nu ** (1 / 6) * kB ** (5 / 6) * ak ** 0.5 * (d_phi + ak * phi_r) / (stream_factor * rF)
    est3 = (nu * h1_om + nu ** (2 / 3) * kB ** (1 / 3) * om_r) / Fd
    est4 = (nu ** 0.5 * kB ** 0.5 * d_phi + nu ** 0.5 * ak * kB ** 0.5 * phi_r) / (R ** 2 * Fd)

    return ResolventSample(
        lam=float(lam),
        F_norms=(rF, Fd),
        sol_norms=(d_om, om_r, d_phi, phi_r, h1_om),
        ratios=(est1, est2, est3, est4),
    )


def resolvent_worst_ratios(
    params: FlowParams,
    k: int,
    lambda_grid: Sequence[float],
    trials: int = 20,
    n: int = 48,
    seed: int = 0,
    extremal: bool = True,
) -> Tuple[Tuple[float, float, float, float], List[Optional[ResolventSample]]]:
    """
    Наихудшие по λ и F отношения левых частей резольвентных оценок к правым

    Args:
        params: Параметры течения
        k: Азимутальное число (!= 0)
        lambda_grid: Значения λ в (𝓛_ν − ikBλ)ω = F
        trials: Число случайных F на каждое λ
        n: Число радиальных узлов
        seed: Зерно генератора
        extremal: Добавить экстремальные F (сингулярные векторы)

    Returns:
        (четыре максимума, образцы, на которых они достигнуты)
    """
    if k == 0:
        raise PreconditionError("Резольвентные оценки проверяются для k != 0")
    if params.B == 0:
        raise PreconditionError("Резольвентные оценки содержат |kB| и требуют B != 0")
    rng = np.random.default_rng(seed)
    bundle = get_bundle(params, k, n)
    grid = bundle.grid
    nrm = _ResolventNorms(bundle)
    I = grid.interior

    worst = [0.0] * 4
    where: List[Optional[ResolventSample]] = [None] * 4
    for lam in lambda_grid:
        matrix = bundle.stiffness - 1j * k * params.B * lam * np.diag(bundle.mass)
        try:
            T = solve(matrix, np.diag(bundle.mass))
        except LinAlgError as e:
            raise ConditioningError(f"Резольвентная система вырождена (k={k}, λ={lam}): {e}")
        forcings = [random_dirichlet_field(grid, rng)[I] for _ in range(trials)]
        if extremal:
            forcings.extend(nrm.extremal_forcings(T))
        for F in forcings:
            sample = _resolvent_sample(params, k, lam, F, T, nrm)
            if sample is None:
                continue
            for i, value in enumerate(sample.ratios):
                if value > worst[i]:
                    worst[i], where[i] = value, sample
    return tuple(worst), where


def verify_prop41(
    params_sweep: Sequence[FlowParams],
    k: int,
    lambda_grid: Optional[Sequence[float]] = None,
    trials: int = 20,
    n: int = 48,
    seed: int = 0,
    extremal: bool = True,
) -> Dict[str, Any]:
    """
    Зависимость констант резольвентных оценок от ν

    c′ = 0. Для каждого ν из sweep считается наихудшее отношение каждой из
    четырех оценок, затем log(отношение) регрессируется по log ν.

    Args:
        params_sweep: Набор параметров (отличаются ν)
        k: Азимутальное число
        lambda_grid: Сетка λ; по умолчанию resolvent_lambda_grid(R)
        trials: Число случайных F на каждое λ
        n: Число радиальных узлов
        seed: Зерно генератора
        extremal: Добавлять экстремальные F

    Returns:
        Словарь: fits (имя -> ScalingFit или None), worst (по ν), samples
    """
    if not params_sweep:
        raise ParameterDomainError("Пустой набор параметров для проверки резольвентных оценок")

    per_nu = []
    for params in sorted(params_sweep, key=lambda p: p.nu):
        grid_l = resolvent_lambda_grid(params.R) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
        worst, where = resolvent_worst_ratios(params, k, grid_l, trials=trials, n=n, seed=seed, extremal=extremal)
        per_nu.append({
            'nu': params.nu,
            'ratios': dict(zip(ESTIMATES, worst)),
            'samples': {name: s.model_dump() if s else None for name, s in zip(ESTIMATES, where)},
        })
        log.debug(f"Резольвентные оценки nu={params.nu}: {worst}")

    fits: Dict[str, Optional[ScalingFit]] = {}
    nus = [p['nu'] for p in per_nu]
    for name in ESTIMATES:
        values = [p['ratios'][name] for p in per_nu]
        if len(set(nus)) < 4:
            fits[name] = None
            continue
        fits[name] = power_law_fit(nus, values)
    if any(f is None for f in fits.values()):
        log.warning("Меньше 4 различных ν: регрессия по ν не выполнена")

    return {'k': k, 'fits': fits, 'per_nu': per_nu}
