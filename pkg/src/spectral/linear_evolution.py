"""
Линейная эволюция одной моды

∂_t f + 𝓛_ν f = h₁ − g ∂_r h₂ интегрируется неявной средней точкой
(Кранк–Николсон для 𝓛_ν, правая часть в середине шага). Вдоль траектории
накапливаются взвешенные пространственно-временные нормы, по которым
проверяются оценки для завихренности и температуры.
"""
import json
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.linalg import lu_factor, lu_solve
from scipy.stats import linregress

from utils import log, ParameterDomainError, PreconditionError, ShapeMismatchError, NumericalFailure
from spectral.models import (
    FlowParams, ModeField, OperatorBundle, ForcingSpec, WeightParams, SpaceTimeLedger,
)
from spectral.radial_grid import l2_norm
from spectral.mode_operators import get_bundle, solve_elliptic
from spectral.stability_analysis import spectral_gap, empirical_gap_constant, power_law_fit

SNAPSHOT_FORMAT_VERSION = 1
UNDERFLOW_LEVEL = 1.0e-250


class CrankNicolson:
    """
    Шаг (M + dt/2·A) f⁺ = (M − dt/2·A) f + dt·M·b для операторов одной моды

    LU-разложение вычисляется один раз на (операторы, dt).
    """

    def __init__(self, bundle: OperatorBundle, dt: float):
        if not dt > 0:
            raise ParameterDomainError(f"dt должно быть > 0, получено {dt}")
        self.bundle = bundle
        self.dt = float(dt)
        M = np.diag(bundle.mass)
        half = 0.5 * self.dt * bundle.stiffness
        self._lu = lu_factor(M + half)
        self._explicit = M - half

    def step(self, values: np.ndarray, source: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Один шаг

        Args:
            values: Полный вектор узловых значений (нули на границе)
            source: Правая часть b на внутренних узлах (в середине шага)

        Returns:
            Новый полный вектор
        """
        I = self.bundle.grid.interior
        rhs = self._explicit @ values[I]
        if source is not None:
            rhs = rhs + self.dt * self.bundle.mass * source
        out = np.zeros_like(values, dtype=complex)
        out[I] = lu_solve(self._lu, rhs, check_finite=False)
        return out


_steppers: Dict[Tuple, CrankNicolson] = {}


def _stepper(bundle: OperatorBundle, dt: float) -> CrankNicolson:
    key = (bundle.k, bundle.params, bundle.grid.n, float(dt))
    stepper = _steppers.get(key)
    if stepper is None:
        if len(_steppers) > 128:
            _steppers.clear()
        stepper = _steppers[key] = CrankNicolson(bundle, dt)
    return stepper


def forcing_values(forcing: Optional[ForcingSpec], bundle: OperatorBundle, t: float) -> Optional[np.ndarray]:
    """Узловые значения h₁(t) − g·∂_r h₂(t) на всей сетке (None при нулевой силе)"""
    if forcing is None or forcing.is_zero:
        return None
    grid = bundle.grid
    total = np.zeros(grid.n, dtype=complex)
    if forcing.h1 is not None:
        total += np.asarray(forcing.h1(t), dtype=complex)
    if forcing.h2 is not None and forcing.g is not None:
        total -= forcing.g * (grid.deriv @ np.asarray(forcing.h2(t), dtype=complex))
    return total


def step_linear(state: ModeField, bundle: OperatorBundle, forcing: Optional[ForcingSpec], t: float, dt: float) -> ModeField:
    """
    Продвинуть ∂_t f + 𝓛_ν f = h₁ − g∂_r h₂ на один шаг

    Args:
        state: Поле в представлении weighted
        bundle: Операторы моды
        forcing: Вынуждающая сила (None - без силы)
        t: Текущее время
        dt: Шаг (> 0)

    Returns:
        Поле в момент t + dt
    """
    if not dt > 0:
        raise ParameterDomainError(f"dt должно быть > 0, получено {dt}")
    if state.rep != 'weighted':
        raise PreconditionError("Линейная эволюция ведется в представлении weighted")
    if state.values.shape != (bundle.grid.n,):
        raise ShapeMismatchError(f"Поле размера {state.values.shape} на сетке n={bundle.grid.n}")
    source = forcing_values(forcing, bundle, t + 0.5 * dt)
    if source is not None:
        source = source[bundle.grid.interior]
    values = _stepper(bundle, dt).step(state.values, source)
    if not np.all(np.isfinite(values)):
        raise NumericalFailure(f"Неконечные значения после шага t={t:.6e}, dt={dt:.3e} (k={bundle.k})")
    return state.with_values(values)


def select_dt(
    params: FlowParams,
    k: int,
    rate: float,
    n: int = 48,
    check: bool = False,
    init: Optional[np.ndarray] = None,
    t_check: float = 1.0,
    tol: float = 1.0e-6,
    max_halvings: int = 8,
) -> float:
    """
    Шаг по времени min(0.1/|kB|, 0.05/rate)

    При check=True шаг делится пополам, пока решения с dt и dt/2 в момент
    t_check не совпадут с относительной точностью tol.
    """
    candidates = []
    if k * params.B != 0:
        candidates.append(0.1 / abs(k * params.B))
    if rate > 0:
        candidates.append(0.05 / rate)
    if not candidates:
        raise ParameterDomainError("Нельзя выбрать шаг: нет ни сдвига kB, ни масштаба затухания")
    dt = min(candidates)
    if not check:
        return dt

    bundle = get_bundle(params, k, n)
    if init is None:
        s = (bundle.grid.nodes - 1.0) / (params.R - 1.0)
        init = np.sin(np.pi * s).astype(complex)
    for _ in range(max_halvings):
        coarse = _advance(init, bundle, dt, t_check)
        fine = _advance(init, bundle, 0.5 * dt, t_check)
        scale = max(l2_norm(fine, bundle.grid), 1.0e-300)
        if l2_norm(coarse - fine, bundle.grid) <= tol * scale:
            return dt
        dt *= 0.5
    log.warning(f"Самосходимость по dt не достигнута за {max_halvings} делений, dt={dt:.3e}")
    return dt


def _advance(values: np.ndarray, bundle: OperatorBundle, dt: float, T: float) -> np.ndarray:
    steps = max(int(math.ceil(T / dt - 1.0e-12)), 1)
    stepper = _stepper(bundle, T / steps)
    out = np.asarray(values, dtype=complex)
    for _ in range(steps):
        out = stepper.step(out)
    return out


def _quantities(values: np.ndarray, bundle: OperatorBundle, kind: str) -> Dict[str, Tuple[str, float]]:
    """Мгновенные нормы для ledger: имя -> (тип накопления, значение)"""
    grid = bundle.grid
    r = grid.nodes
    out = {
        'f': ('l2', l2_norm(values, grid)),
        'df': ('l2', l2_norm(grid.deriv @ values, grid)),
        'f_r': ('l2', l2_norm(values / r, grid)),
    }
    if kind == 'vorticity':
        phi = solve_elliptic(values, bundle)
        out['dphi'] = ('l2', l2_norm(grid.deriv @ phi, grid))
        out['phi_r'] = ('l2', l2_norm(phi / r, grid))
        out['phi_sqrt_r'] = ('linf', float(np.max(np.abs(phi / np.sqrt(r)))))
    return out


def _forcing_quantities(forcing: Optional[ForcingSpec], bundle: OperatorBundle, t: float) -> Dict[str, Tuple[str, float]]:
    """Нормы правой части: ‖r h₁‖ и ‖(|g| + r|g′|) h₂‖"""
    if forcing is None or forcing.is_zero:
        return {'r_h1': ('l2', 0.0), 'g_h2': ('l2', 0.0)}
    grid = bundle.grid
    r = grid.nodes
    r_h1 = 0.0
    if forcing.h1 is not None:
        r_h1 = l2_norm(r * np.asarray(forcing.h1(t)), grid)
    g_h2 = 0.0
    if forcing.h2 is not None and forcing.g is not None:
        g = np.asarray(forcing.g)
        gp = np.asarray(forcing.g_prime) if forcing.g_prime is not None else grid.deriv @ g
        g_h2 = l2_norm((np.abs(g) + r * np.abs(gp)) * np.asarray(forcing.h2(t)), grid)
    return {'r_h1': ('l2', r_h1), 'g_h2': ('l2', g_h2)}


class LedgerAccumulator:
    """Бегущие max и трапециевидные интегралы квадратов взвешенных норм"""

    def __init__(self, rate: float = 0.0):
        self.rate = rate
        self.ledger = SpaceTimeLedger()
        self._last_t: Optional[float] = None
        self._last: Dict[str, Tuple[str, float]] = {}

    def add(self, t: float, quantities: Dict[str, Tuple[str, float]]):
        weight = math.exp(self.rate * t)
        current = {name: (kind, weight * value) for name, (kind, value) in quantities.items()}
        led = self.ledger
        for name, (kind, value) in current.items():
            if kind == 'l2':
                led.linf_l2[name] = max(led.linf_l2.get(name, 0.0), value)
                led.l2_l2.setdefault(name, 0.0)
            else:
                led.l2_linf.setdefault(name, 0.0)
        if self._last_t is not None:
            dt = t - self._last_t
            led.dt_log.append(dt)
            for name, (kind, value) in current.items():
                prev = self._last[name][1]
                target = led.l2_l2 if kind == 'l2' else led.l2_linf
                target[name] += 0.5 * dt * (prev * prev + value * value)
        self._last_t = t
        self._last = current


class SnapshotWriter:
    """
    Поток снимков (t, узловые значения)

    Формат 'ndjson' пишет строку на снимок, 'npz' копит снимки и сохраняет
    архив при закрытии.
    """

    def __init__(self, path: str, fmt: str = 'ndjson', every: int = 1):
        if fmt not in ('ndjson', 'npz'):
            raise ParameterDomainError(f"Неизвестный формат снимков: {fmt}")
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.every = max(int(every), 1)
        self._count = 0
        self._times: List[float] = []
        self._values: List[np.ndarray] = []
        self._fh = open(self.path, 'w', encoding='utf-8') if fmt == 'ndjson' else None

    def write(self, t: float, values: np.ndarray):
        if self._count % self.every == 0:
            if self._fh is not None:
                record = {'t': float(t), 're': np.real(values).tolist(), 'im': np.imag(values).tolist()}
                self._fh.write(json.dumps(record) + '\n')
            else:
                self._times.append(float(t))
                self._values.append(np.array(values, dtype=complex))
        self._count += 1

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        elif self.fmt == 'npz':
            np.savez(
                self.path,
                format_version=SNAPSHOT_FORMAT_VERSION,
                t=np.array(self._times),
                values=np.array(self._values),
            )
        log.debug(f"Снимки сохранены: {self.path}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_snapshots(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Прочитать снимки: (времена, массив значений формы (шаги, n))"""
    p = Path(path)
    if p.suffix == '.npz':
        with np.load(p) as data:
            if int(data['format_version']) != SNAPSHOT_FORMAT_VERSION:
                raise PreconditionError(f"Неподдерживаемая версия снимков: {int(data['format_version'])}")
            return data['t'], data['values']
    times, values = [], []
    with open(p, 'r', encoding='utf-8') as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            times.append(rec['t'])
            values.append(np.array(rec['re']) + 1j * np.array(rec['im']))
    return np.array(times), np.array(values)


class EvolutionResult(BaseModel):
    """Итог линейной эволюции"""
    final: ModeField
    times: List[float]
    l2_history: List[float]
    ledger: SpaceTimeLedger
    dt: float
    monotone: bool

    class Config:
        arbitrary_types_allowed = True


def evolve(
    init: ModeField,
    bundle: OperatorBundle,
    horizon: float,
    dt: float,
    forcing: Optional[ForcingSpec] = None,
    rate: float = 0.0,
    kind: str = 'vorticity',
    writer: Optional[SnapshotWriter] = None,
    on_step: Optional[Callable[[float, np.ndarray], None]] = None,
) -> EvolutionResult:
    """
    Проинтегрировать до horizon с накоплением ledger

    Args:
        init: Начальное поле (weighted)
        bundle: Операторы моды
        horizon: Конечное время
        dt: Желаемый шаг (уменьшается, чтобы попасть точно в horizon)
        forcing: Вынуждающая сила
        rate: Показатель веса 𝓔 = e^{rate·t}
        kind: 'vorticity' (с нормами φ) или 'temperature'
        writer: Поток снимков
        on_step: Обратный вызов (t, значения) после каждого шага

    Returns:
        EvolutionResult
    """
    if not horizon > 0:
        raise ParameterDomainError(f"horizon должно быть > 0, получено {horizon}")
    if not dt > 0:
        raise ParameterDomainError(f"dt должно быть > 0, получено {dt}")
    steps = max(int(math.ceil(horizon / dt - 1.0e-12)), 1)
    dt = horizon / steps

    state = init
    acc = LedgerAccumulator(rate)
    forced = forcing is not None and not forcing.is_zero
    times, history = [0.0], [l2_norm(init.values, bundle.grid)]
    acc.add(0.0, {**_quantities(init.values, bundle, kind), **_forcing_quantities(forcing, bundle, 0.0)})
    if writer is not None:
        writer.write(0.0, init.values)

    monotone = True
    for j in range(steps):
        t = j * dt
        state = step_linear(state, bundle, forcing, t, dt)
        t_next = (j + 1) * dt
        acc.add(t_next, {**_quantities(state.values, bundle, kind), **_forcing_quantities(forcing, bundle, t_next)})
        norm = l2_norm(state.values, bundle.grid)
        if not forced and norm > history[-1] * (1.0 + 1.0e-12) + 1.0e-300:
            monotone = False
        times.append(t_next)
        history.append(norm)
        if writer is not None:
            writer.write(t_next, state.values)
        if on_step is not None:
            on_step(t_next, state.values)

    return EvolutionResult(
        final=state, times=times, l2_history=history, ledger=acc.ledger, dt=dt, monotone=monotone,
    )


def ledger_from_snapshots(
    times: np.ndarray,
    values: np.ndarray,
    bundle: OperatorBundle,
    rate: float = 0.0,
    kind: str = 'vorticity',
) -> SpaceTimeLedger:
    """Пересчитать ledger по сохраненным снимкам (без вынуждающей силы)"""
    acc = LedgerAccumulator(rate)
    for t, vals in zip(times, values):
        acc.add(float(t), _quantities(np.asarray(vals, dtype=complex), bundle, kind))
    return acc.ledger


def default_weight(params: FlowParams, k: int, n: int = 48) -> WeightParams:
    """c′ = половина эмпирической константы щели (0 при B = 0)"""
    if params.B == 0:
        return WeightParams(c_prime=0.0)
    return WeightParams(c_prime=0.5 * empirical_gap_constant(params, k, n=n))


def _default_horizon(params: FlowParams, k: int, n: int) -> float:
    psi = spectral_gap(params, k, n=n).psi
    return 10.0 / psi


def measure_decay_rate(
    params: FlowParams,
    k: int,
    init: ModeField,
    horizon: Optional[float] = None,
    n: Optional[int] = None,
    dt: Optional[float] = None,
) -> Dict[str, Any]:
    """
    Скорость затухания ‖ρ_k(t)‖ по хвосту траектории

    Наклон log‖ρ(t)‖ на окне [T/2, T]. При исчезновении нормы окно
    укорачивается до последнего представимого значения.

    Args:
        params: Параметры течения
        k: Азимутальное число (!= 0)
        init: Начальное поле (weighted)
        horizon: T; по умолчанию 10/Ψ (не меньше 5/Ψ)
        n: Число узлов (по умолчанию сетка init)
        dt: Шаг по времени (по умолчанию select_dt)

    Returns:
        Словарь: rate, r_squared, psi, window, underflow, integrated_decay_ratio, within_gap_band
    """
    n = n or init.grid.n
    bundle = get_bundle(params, k, n)
    psi = spectral_gap(params, k, n=n).psi
    if horizon is None:
        horizon = 10.0 / psi
    elif horizon < 5.0 / psi * (1.0 - 1.0e-9):
        raise PreconditionError(f"Горизонт {horizon:.3e} меньше 5 e-фолдингов 5/Ψ = {5.0 / psi:.3e}")
    dt = dt or select_dt(params, k, psi, n=n)

    enhanced = params.enhanced_rate(k) if params.B != 0 else 0.0
    result = evolve(init, bundle, horizon, dt, rate=0.0, kind='temperature')
    t = np.array(result.times)
    norms = np.array(result.l2_history)

    window = (t >= 0.5 * horizon)
    underflow = bool(np.any(norms[window] < UNDERFLOW_LEVEL))
    if underflow:
        alive = norms >= UNDERFLOW_LEVEL
        last = float(t[alive][-1]) if np.any(alive) else 0.0
        window = alive & (t >= 0.5 * last)
        log.warning(f"Норма исчезла до T={horizon:.3e}, окно подгонки сокращено до [{0.5 * last:.3e}, {last:.3e}]")
    if np.count_nonzero(window) < 3:
        raise PreconditionError("Слишком мало точек для подгонки скорости затухания")

    fit = linregress(t[window], np.log(norms[window]))
    rate = -float(fit.slope)
    init_norm = result.l2_history[0]
    integrated = None
    if enhanced > 0 and init_norm > 0:
        integrated = enhanced * result.ledger.l2_l2.get('f', 0.0) / init_norm ** 2

    return {
        'k': k,
        'nu': params.nu,
        'rate': rate,
        'r_squared': float(fit.rvalue ** 2),
        'psi': psi,
        'horizon': horizon,
        'window': [float(t[window][0]), float(t[window][-1])],
        'underflow': underflow,
        'integrated_decay_ratio': integrated,
        'within_gap_band': bool(0.9 * psi <= rate <= 1.5 * psi),
    }


def _check_regime(params: FlowParams, k: int, regime: Optional[str]) -> str:
    actual = params.regime(k)
    if regime is not None and regime != actual:
        raise PreconditionError(
            f"Режим {regime} не соответствует νk² = {params.nu * k * k:.3e}, |B| = {abs(params.B):.3e} ({actual})"
        )
    return actual


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def verify_spacetime_vorticity(
    params: FlowParams,
    k: int,
    init: ModeField,
    forcing: Optional[ForcingSpec] = None,
    weight: Optional[WeightParams] = None,
    horizon: Optional[float] = None,
    dt: Optional[float] = None,
    regime: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Пространственно-временная оценка для завихренности

    В режиме усиленной диссипации (νk² ≤ |B|) левая часть N₁+…+N₄ сравнивается
    с I₁+I₂+I₃+F₁+F₂, в диффузионном режиме - с оценкой через ‖ω(0)‖ и ν^{-1/2}.

    Returns:
        Словарь: regime, lhs_terms, rhs_terms, lhs, rhs, ratio, ledger
    """
    if k == 0:
        raise PreconditionError("Оценка для завихренности ставится для k != 0")
    regime = _check_regime(params, k, regime)
    n = init.grid.n
    bundle = get_bundle(params, k, n)
    weight = weight or WeightParams()
    rate = weight.rate(params, k)
    if horizon is None:
        horizon = _default_horizon(params, k, n)
    if dt is None:
        dt = select_dt(params, k, spectral_gap(params, k, n=n).psi, n=n)

    result = evolve(init, bundle, horizon, dt, forcing=forcing, rate=rate, kind='vorticity')
    led = result.ledger
    grid = bundle.grid
    r = grid.nodes
    nu, B, R = params.nu, abs(params.B), params.R
    ak, kB = abs(k), abs(k * params.B)
    w0 = init.values

    if regime == 'enhanced':
        lhs_terms = {
            'N1': led.sup('f'),
            'N2': (nu * k * k) ** (1 / 6) * B ** (1 / 3) / R * led.l2l2('f'),
            'N3': nu ** 0.5 * led.l2l2('df') + (nu * k * k) ** 0.5 * led.l2l2('f_r'),
            'N4': B ** 0.5 / R ** 2 * (ak * led.l2l2('dphi') + k * k * led.l2l2('phi_r')),
        }
        rhs_terms = {
            'I1': l2_norm(w0, grid) + math.log(R) ** -1.5 / R ** 2 * l2_norm(r ** 2 * w0, grid)
            + R ** 3 * l2_norm(w0 / r ** 3, grid),
            'I2': (nu / kB) ** (1 / 3) * R * l2_norm(grid.deriv @ w0, grid),
            'I3': R * l2_norm(w0 / r, grid) * (nu * k * k / B) ** (2 / 3),
            'F1': nu ** (-1 / 6) * kB ** (-1 / 3) * led.l2l2('r_h1'),
            'F2': nu ** -0.5 * led.l2l2('g_h2'),
        }
    else:
        lhs_terms = {
            'sup': led.sup('f'),
            'dissipation': nu ** 0.5 * led.l2l2('df') + (nu * k * k) ** 0.5 * led.l2l2('f_r'),
            'stream': (nu * k * k) ** 0.5 / R ** 2 * (ak * led.l2l2('dphi') + k * k * led.l2l2('phi_r')),
        }
        rhs_terms = {
            'initial': l2_norm(w0, grid),
            'h1': nu ** -0.5 * led.l2l2('r_h1') / ak,
            'h2': nu ** -0.5 * led.l2l2('g_h2'),
        }

    lhs, rhs = sum(lhs_terms.values()), sum(rhs_terms.values())
    return {
        'k': k,
        'nu': nu,
        'regime': regime,
        'c_prime': weight.c_prime,
        'horizon': horizon,
        'lhs_terms': lhs_terms,
        'rhs_terms': rhs_terms,
        'lhs': lhs,
        'rhs': rhs,
        'ratio': _ratio(lhs, rhs),
        'ledger': led.to_dict(),
    }


def _temperature_lhs_squared(led: SpaceTimeLedger, params: FlowParams, k: int) -> float:
    nu = params.nu
    enhanced = params.enhanced_rate(k) if params.B != 0 else 0.0
    return (
        led.sup('f') ** 2
        + enhanced * led.l2_l2.get('f', 0.0)
        + nu * led.l2_l2.get('df', 0.0)
        + nu * k * k * led.l2_l2.get('f_r', 0.0)
    )


def _forced_rhs_squared(led: SpaceTimeLedger, params: FlowParams, k: int) -> float:
    nu, B = params.nu, abs(params.B)
    first = 0.0
    if led.l2_l2.get('r_h1', 0.0) > 0:
        if B == 0:
            raise PreconditionError("Оценка для силы f₁ в режиме усиленной диссипации требует B != 0")
        first = (nu * k * k) ** (-1 / 3) * B ** (-2 / 3) * led.l2_l2['r_h1']
    return first + led.l2_l2.get('g_h2', 0.0) / nu


def verify_spacetime_temperature(
    params: FlowParams,
    k: int,
    init: ModeField,
    forcing: Optional[ForcingSpec] = None,
    weight: Optional[WeightParams] = None,
    horizon: Optional[float] = None,
    dt: Optional[float] = None,
    regime: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Пространственно-временные оценки для температуры

    ρ = ρ^l + ρ^NL: однородная часть (начальные данные, без силы) и
    вынужденная часть (нулевые начальные данные). Каждая часть проверяется
    своей оценкой, сумма - итоговой оценкой своего режима.

    Returns:
        Словарь: regime, homogeneous, forced, combined, integrated_decay_ratio, triangle_ok, ledgers
    """
    if k == 0:
        raise PreconditionError("Оценка для температуры ставится для k != 0")
    regime = _check_regime(params, k, regime)
    n = init.grid.n
    bundle = get_bundle(params, k, n)
    weight = weight or WeightParams()
    rate = weight.rate(params, k)
    if horizon is None:
        horizon = _default_horizon(params, k, n)
    if dt is None:
        dt = select_dt(params, k, spectral_gap(params, k, n=n).psi, n=n)

    zero = init.with_values(np.zeros_like(init.values))
    full = evolve(init, bundle, horizon, dt, forcing=forcing, rate=rate, kind='temperature').ledger
    linear = evolve(init, bundle, horizon, dt, forcing=None, rate=rate, kind='temperature').ledger
    forced = evolve(zero, bundle, horizon, dt, forcing=forcing, rate=rate, kind='temperature').ledger

    grid = bundle.grid
    nu, R = params.nu, params.R
    init_sq = l2_norm(init.values, grid) ** 2
    enhanced = params.enhanced_rate(k) if params.B != 0 else 0.0

    homogeneous_lhs = _temperature_lhs_squared(linear, params, k)
    forced_lhs = _temperature_lhs_squared(forced, params, k)
    forced_rhs = _forced_rhs_squared(full, params, k)

    if regime == 'enhanced':
        combined_lhs = _temperature_lhs_squared(full, params, k)
        combined_rhs = init_sq + forced_rhs
    else:
        combined_lhs = (
            full.sup('f') + nu ** 0.5 * full.l2l2('df') + (nu * k * k) ** 0.5 * full.l2l2('f_r')
        )
        combined_rhs = (
            math.sqrt(init_sq) + nu ** -0.5 * full.l2l2('r_h1') / abs(k) + nu ** -0.5 * full.l2l2('g_h2')
        )

    slack = 1.0e-9
    triangle_ok = all(
        full.sup(name) <= linear.sup(name) + forced.sup(name) + slack * (1.0 + full.sup(name))
        and full.l2l2(name) <= linear.l2l2(name) + forced.l2l2(name) + slack * (1.0 + full.l2l2(name))
        for name in ('f', 'df', 'f_r')
    )

    return {
        'k': k,
        'nu': nu,
        'regime': regime,
        'c_prime': weight.c_prime,
        'horizon': horizon,
        'homogeneous': {'lhs': homogeneous_lhs, 'rhs': init_sq, 'ratio': _ratio(homogeneous_lhs, init_sq)},
        'forced': {'lhs': forced_lhs, 'rhs': forced_rhs, 'ratio': _ratio(forced_lhs, forced_rhs)},
        'combined': {'lhs': combined_lhs, 'rhs': combined_rhs, 'ratio': _ratio(combined_lhs, combined_rhs)},
        'integrated_decay_ratio': _ratio(enhanced * linear.l2_l2.get('f', 0.0), init_sq) if enhanced > 0 else None,
        'triangle_ok': triangle_ok,
        'nl_identically_zero': forced.sup('f') == 0.0,
        'ledgers': {'full': full.to_dict(), 'linear': linear.to_dict(), 'forced': forced.to_dict()},
    }


def fit_ratio_vs_nu(results: List[Dict[str, Any]], key: str = 'ratio') -> Optional[Any]:
    """Регрессия отношения по ν для серии verify_* (None, если < 4 точек)"""
    points = [(r['nu'], r[key] if not isinstance(r[key], dict) else r[key]['ratio']) for r in results]
    points = [(x, y) for x, y in points if y and math.isfinite(y) and y > 0]
    if len({x for x, _ in points}) < 4:
        return None
    xs, ys = zip(*points)
    return power_law_fit(xs, ys)
