"""
Усеченная нелинейная система завихренность/температура

Моды |k| <= K связаны переносом (свертки по l) и плавучестью (соседние
моды k±1). Моды k != 0 живут во вращающейся системе в представлении
weighted, нулевая мода - в исходных переменных. Шаг IMEX: 𝓛_ν неявно
(Кранк–Николсон), перенос и плавучесть явно (предиктор–корректор Хойна).
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import linregress

from utils import log, ParameterDomainError, PreconditionError, ShapeMismatchError
from spectral.models import (
    FlowParams, RadialGrid, ModeField, SimState, EnergyLedger, WeightParams, ExperimentVerdict,
)
from spectral.radial_grid import build_grid, l2_norm, h1r_norm
from spectral.mode_operators import get_bundle, solve_elliptic
from spectral.linear_evolution import CrankNicolson, _stepper, default_weight, UNDERFLOW_LEVEL

CHECKPOINT_FORMAT_VERSION = 1
ENERGY_CSV_COLUMNS = [
    't', 'k', 'E_sup', 'E_l2', 'E_inviscid', 'E_dissipation', 'H_sup', 'H_l2', 'H_dissipation',
]


def _check_modes(modes: np.ndarray, K: int, grid: RadialGrid):
    if modes.shape != (2 * K + 1, grid.n):
        raise ShapeMismatchError(f"Ожидается массив мод формы {(2 * K + 1, grid.n)}, получено {modes.shape}")


def to_tilde(modes: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """
    Поля f̃_k = r^{-1/2} f_k = e^{ikAt} f̂_k

    Нулевая мода хранится уже в исходных переменных и не меняется.
    """
    K = (modes.shape[0] - 1) // 2
    out = modes / np.sqrt(grid.nodes)[None, :]
    out[K] = modes[K]
    return out


def stream_functions(omega: np.ndarray, params: FlowParams, grid: RadialGrid) -> np.ndarray:
    """φ_k для всех мод по ω_k (нулевая мода - оператор ∂² + r^{-1}∂)"""
    K = (omega.shape[0] - 1) // 2
    phi = np.zeros_like(omega, dtype=complex)
    for j in range(2 * K + 1):
        if np.any(omega[j]):
            phi[j] = solve_elliptic(omega[j], get_bundle(params, j - K, grid.n))
    return phi


def _transport_sums(field: np.ndarray, phi: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """
    S_k = Σ_l [i(k−l) ∂φ̃_l f̃_{k−l} − i l φ̃_l ∂f̃_{k−l}] по |l|, |k−l| <= K

    (1/r)·S_k - мода k переноса (1/r)(∂_rφ ∂_θf − ∂_θφ ∂_rf).
    """
    K = (field.shape[0] - 1) // 2
    P = to_tilde(phi, grid)
    F = to_tilde(field, grid)
    dP = P @ grid.deriv.T
    dF = F @ grid.deriv.T
    m = np.arange(-K, K + 1)
    out = np.zeros_like(F, dtype=complex)
    for l in range(-K, K + 1):
        pl, dpl = P[l + K], dP[l + K]
        if not (np.any(pl) or np.any(dpl)):
            continue
        # k = l + m, |k| <= K
        lo, hi = max(-K, -K - l), min(K, K - l)
        ms = slice(lo + K, hi + K + 1)
        ks = slice(lo + l + K, hi + l + K + 1)
        out[ks] += 1j * m[ms, None] * dpl[None, :] * F[ms] - 1j * l * pl[None, :] * dF[ms]
    return out


def transport_modes(field: np.ndarray, phi: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """
    Перенос во всех модах в представлении хранения

    k != 0: r^{-1/2}·S_k (weighted), k = 0: S_0 / r (исходные переменные).
    """
    S = _transport_sums(field, phi, grid)
    K = (field.shape[0] - 1) // 2
    r = grid.nodes
    out = S / np.sqrt(r)[None, :]
    out[K] = S[K] / r
    return out


def _single_mode(values: np.ndarray, k: int, grid: RadialGrid) -> ModeField:
    return ModeField(k=k, values=values, rep='hat' if k == 0 else 'weighted', grid=grid)


def vorticity_nonlinear(omega_modes: np.ndarray, phi_modes: np.ndarray, k: int, grid: RadialGrid) -> ModeField:
    """
    Нелинейный член уравнения для ω_k

    (1/r)[ik f₁ − r^{1/2}∂_r(r^{1/2} f₂)], f₁ = Σ ∂_r(r^{-1/2}φ_l)ω_{k−l},
    f₂ = Σ il r^{-3/2}φ_l ω_{k−l}. Для k = 0 возвращается проекция в исходных
    переменных.
    """
    K = (omega_modes.shape[0] - 1) // 2
    _check_modes(omega_modes, K, grid)
    _check_modes(phi_modes, K, grid)
    if abs(k) > K:
        raise PreconditionError(f"Мода k={k} вне усечения K={K}")
    return _single_mode(transport_modes(omega_modes, phi_modes, grid)[k + K], k, grid)


def temperature_nonlinear(rho_modes: np.ndarray, phi_modes: np.ndarray, k: int, grid: RadialGrid) -> ModeField:
    """Нелинейный член уравнения для ρ_k (g₁, g₂ вместо f₁, f₂)"""
    K = (rho_modes.shape[0] - 1) // 2
    _check_modes(rho_modes, K, grid)
    _check_modes(phi_modes, K, grid)
    if abs(k) > K:
        raise PreconditionError(f"Мода k={k} вне усечения K={K}")
    return _single_mode(transport_modes(rho_modes, phi_modes, grid)[k + K], k, grid)


def buoyancy_modes(rho: np.ndarray, t: float, params: FlowParams, grid: RadialGrid) -> np.ndarray:
    """
    Плавучесть cosθ ∂_rρ − (sinθ/r)∂_θρ во всех модах

    В исходных переменных: ∂_r(ρ̂_{k−1}+ρ̂_{k+1})/2 + [(k+1)ρ̂_{k+1} − (k−1)ρ̂_{k−1}]/(2r).
    Вклады ρ_{k−1} несут фазу e^{iAt}, вклады ρ_{k+1} - фазу e^{−iAt}.
    Соседи вне усечения считаются нулевыми.
    """
    K = (rho.shape[0] - 1) // 2
    r = grid.nodes
    T = to_tilde(rho, grid)
    dT = T @ grid.deriv.T
    up, down = np.exp(1j * params.A * t), np.exp(-1j * params.A * t)
    tilde = np.zeros_like(T, dtype=complex)
    ks = np.arange(-K, K + 1)
    # ρ_{k−1} -> строки 1..2K
    tilde[1:] += up * (0.5 * dT[:-1] - (ks[1:, None] - 1) * T[:-1] / (2 * r))
    # ρ_{k+1} -> строки 0..2K−1
    tilde[:-1] += down * (0.5 * dT[1:] + (ks[:-1, None] + 1) * T[1:] / (2 * r))
    out = params.g_scale * np.sqrt(r)[None, :] * tilde
    out[K] = params.g_scale * tilde[K]
    return out


def buoyancy_rhs(rho_modes: np.ndarray, k: int, t: float, params: FlowParams, grid: RadialGrid) -> ModeField:
    """Плавучесть для моды k (weighted; для k = 0 - в исходных переменных)"""
    K = (rho_modes.shape[0] - 1) // 2
    _check_modes(rho_modes, K, grid)
    if abs(k) > K:
        raise PreconditionError(f"Мода k={k} вне усечения K={K}")
    return _single_mode(buoyancy_modes(rho_modes, t, params, grid)[k + K], k, grid)


def zero_mode_rhs(state: SimState, params: FlowParams) -> Tuple[np.ndarray, np.ndarray]:
    """Вынуждение ω_= (плавучесть минус перенос) и ρ_= (минус перенос)"""
    K = state.K
    om = buoyancy_modes(state.rho, state.t, params, state.grid)[K]
    om = om - transport_modes(state.omega, state.phi, state.grid)[K]
    rh = -transport_modes(state.rho, state.phi, state.grid)[K]
    return om, rh


def explicit_terms(
    omega: np.ndarray, rho: np.ndarray, phi: np.ndarray, t: float,
    params: FlowParams, grid: RadialGrid, include_nonlinear: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """Явная часть: плавучесть − перенос для ω, − перенос для ρ"""
    n_om = buoyancy_modes(rho, t, params, grid)
    if include_nonlinear:
        n_om = n_om - transport_modes(omega, phi, grid)
        n_rho = -transport_modes(rho, phi, grid)
    else:
        n_rho = np.zeros_like(rho, dtype=complex)
    return n_om, n_rho


def initial_state(
    omega: np.ndarray, rho: np.ndarray, params: FlowParams, grid: RadialGrid, t: float = 0.0,
) -> SimState:
    """Собрать состояние с пересчетом функций тока; границы обнуляются"""
    K = params.K
    omega = np.array(omega, dtype=complex)
    rho = np.array(rho, dtype=complex)
    _check_modes(omega, K, grid)
    _check_modes(rho, K, grid)
    for arr in (omega, rho):
        arr[:, 0] = 0.0
        arr[:, -1] = 0.0
    return SimState(t=t, K=K, grid=grid, omega=omega, rho=rho, phi=stream_functions(omega, params, grid))


def zero_state(params: FlowParams, n: int) -> SimState:
    grid = build_grid(params.R, n)
    shape = (2 * params.K + 1, n)
    return initial_state(np.zeros(shape), np.zeros(shape), params, grid)


def _implicit_step(
    values: np.ndarray, source: np.ndarray, params: FlowParams, grid: RadialGrid, dt: float,
) -> np.ndarray:
    K = (values.shape[0] - 1) // 2
    I = grid.interior
    out = np.zeros_like(values, dtype=complex)
    for j in range(2 * K + 1):
        stepper: CrankNicolson = _stepper(get_bundle(params, j - K, grid.n), dt)
        out[j] = stepper.step(values[j], source[j, I])
    return out


def step_nonlinear(
    state: SimState, dt: float, params: FlowParams, include_nonlinear: bool = True,
) -> SimState:
    """
    Один шаг IMEX

    Предиктор u* с явной частью N(uⁿ), корректор с ½(N(uⁿ) + N(u*));
    обе стадии используют одно LU-разложение (M + dt/2·A).

    Args:
        state: Текущее состояние
        dt: Шаг (> 0)
        params: Параметры течения
        include_nonlinear: False - только линейная часть с плавучестью

    Returns:
        Новое состояние
    """
    if not dt > 0:
        raise ParameterDomainError(f"dt должно быть > 0, получено {dt}")
    grid = state.grid
    t0, t1 = state.t, state.t + dt

    n_om0, n_rho0 = explicit_terms(state.omega, state.rho, state.phi, t0, params, grid, include_nonlinear)
    om_star = _implicit_step(state.omega, n_om0, params, grid, dt)
    rho_star = _implicit_step(state.rho, n_rho0, params, grid, dt)
    phi_star = stream_functions(om_star, params, grid)

    n_om1, n_rho1 = explicit_terms(om_star, rho_star, phi_star, t1, params, grid, include_nonlinear)
    omega = _implicit_step(state.omega, 0.5 * (n_om0 + n_om1), params, grid, dt)
    rho = _implicit_step(state.rho, 0.5 * (n_rho0 + n_rho1), params, grid, dt)
    return SimState(t=t1, K=state.K, grid=grid, omega=omega, rho=rho, phi=stream_functions(omega, params, grid))


def velocity_bound(state: SimState) -> float:
    """Оценка max|u| по L^∞-оценкам для функции тока"""
    grid = state.grid
    R = grid.R
    r = grid.nodes
    geom = math.sqrt(R / (R - 1.0))
    total = geom * (1.0 + math.log(R)) * l2_norm(r ** 1.5 * state.omega[state.K], grid)
    for j in range(2 * state.K + 1):
        k = j - state.K
        if k != 0:
            total += geom * abs(k) ** -0.5 * l2_norm(r * state.omega[j], grid)
    return total


def stable_dt(state: SimState, params: FlowParams) -> float:
    """Ограничение явной части dt <= 0.5/(K·max|u|)"""
    u = velocity_bound(state)
    return math.inf if u == 0.0 else 0.5 / (state.K * u)


def nonlinear_dt(state: SimState, params: FlowParams) -> float:
    """Шаг min(0.1/|B|, 0.05/(скорость затухания k=1), CFL)"""
    candidates = [stable_dt(state, params)]
    if params.B != 0:
        candidates.append(0.1 / abs(params.B))
        candidates.append(0.05 / params.enhanced_rate(1))
    else:
        candidates.append(0.05 * params.R ** 2 / params.nu)
    return min(candidates)


def conjugate_drift(state: SimState) -> float:
    """max |f_{−k} − conj(f_k)| по модам и полям"""
    drift = 0.0
    for arr in (state.omega, state.rho):
        drift = max(drift, float(np.max(np.abs(arr[::-1] - np.conj(arr)))))
    return drift


class EnergyAccumulator:
    """
    Онлайн-накопление E_k, H_k по снимкам

    Для k != 0 поля берутся в представлении weighted с весом 𝓔_k,
    для k = 0 - нормы ω_=, ρ_= без веса.
    """

    def __init__(self, params: FlowParams, K: int, weight: Optional[WeightParams] = None):
        self.params = params
        self.K = K
        weight = weight or WeightParams()
        self.ks = np.arange(-K, K + 1)
        self.rates = np.array([weight.rate(params, int(k)) for k in self.ks])
        size = 2 * K + 1
        self.sup_om = np.zeros(size)
        self.sup_rho = np.zeros(size)
        self.sup_om_weighted0 = 0.0
        self.ints = {name: np.zeros(size) for name in ('om', 'om_r', 'phi', 'rho', 'rho_r')}
        self.count = 0
        self._last_t: Optional[float] = None
        self._last: Optional[Dict[str, np.ndarray]] = None
        self.first: Optional[SimState] = None

    def _snapshot(self, state: SimState) -> Dict[str, np.ndarray]:
        grid = state.grid
        w = grid.quad_weights
        r = grid.nodes
        e = np.exp(self.rates * state.t)

        def l2(arr):
            return np.sqrt(np.abs(arr) ** 2 @ w)

        return {
            'om': e * l2(state.omega),
            'om_r': e * l2(state.omega / r),
            'phi': e * np.max(np.abs(state.phi / np.sqrt(r)), axis=1),
            'rho': e * l2(state.rho),
            'rho_r': e * l2(state.rho / r),
        }

    def add(self, state: SimState):
        if self.first is None:
            self.first = state
        q = self._snapshot(state)
        self.sup_om = np.maximum(self.sup_om, q['om'])
        self.sup_rho = np.maximum(self.sup_rho, q['rho'])
        self.sup_om_weighted0 = max(self.sup_om_weighted0, l2_norm(state.zero_weighted('omega'), state.grid))
        if self._last is not None:
            dt = state.t - self._last_t
            for name in self.ints:
                self.ints[name] += 0.5 * dt * (self._last[name] ** 2 + q[name] ** 2)
        self._last_t, self._last = state.t, q
        self.count += 1

    def ledger(self, eps0: float = 1.0, eps1: float = 1.0, single_dt: float = 1.0) -> EnergyLedger:
        """Собрать EnergyLedger по накопленному"""
        params = self.params
        nu, B, R = params.nu, abs(params.B), params.R
        ints = dict(self.ints)
        if self.count == 1 and self._last is not None:
            ints = {name: single_dt * self._last[name] ** 2 for name in ints}

        led = EnergyLedger()
        for j, k in enumerate(self.ks):
            k = int(k)
            if k == 0:
                led.E_parts[0] = {'sup': float(self.sup_om[j]), 'weighted_sup': float(self.sup_om_weighted0)}
                led.H_parts[0] = {'sup': float(self.sup_rho[j])}
                led.E[0] = float(self.sup_om[j])
                led.H[0] = float(self.sup_rho[j])
                continue
            enh_half = (nu * k * k) ** (1 / 6) * B ** (1 / 3) / R
            diss = (nu * k * k) ** 0.5
            e_parts = {
                'sup': float(self.sup_om[j]),
                'l2': float(enh_half * math.sqrt(ints['om'][j])),
                'inviscid': float(B ** 0.5 * abs(k) ** 1.5 / R ** 2 * math.sqrt(ints['phi'][j])),
                'dissipation': float(diss * math.sqrt(ints['om_r'][j])),
            }
            h_parts = {
                'sup': float(self.sup_rho[j]),
                'l2': float(enh_half * math.sqrt(ints['rho'][j])),
                'dissipation': float(diss * math.sqrt(ints['rho_r'][j])),
            }
            led.E_parts[k], led.H_parts[k] = e_parts, h_parts
            led.E[k], led.H[k] = sum(e_parts.values()), sum(h_parts.values())

        if self.first is not None:
            led.M0, led.rho0 = initial_energy(self.first, params)
        led.E_sum = float(sum(led.E.values()))
        led.H_sum = float(sum(led.H.values()))
        led.threshold_rhs = threshold_rhs(params, eps0, eps1)
        return led


def threshold_rhs(params: FlowParams, eps0: float = 1.0, eps1: float = 1.0) -> Dict[str, float]:
    """Правые части ε₀ν^{1/2}|B|^{1/2}R^{-2} и ε₁ν^{7/6}|B|^{5/6}R^{-3}"""
    nu, B, R = params.nu, abs(params.B), params.R
    return {
        'E': eps0 * nu ** 0.5 * B ** 0.5 / R ** 2,
        'H': eps1 * nu ** (7 / 6) * B ** (5 / 6) / R ** 3,
    }


def initial_energy(state: SimState, params: FlowParams) -> Tuple[Dict[int, float], Dict[int, float]]:
    """M_k(0) и ‖ρ_k(0)‖ по модам"""
    grid = state.grid
    r = grid.nodes
    R = params.R
    M0, rho0 = {}, {}
    for j in range(2 * state.K + 1):
        k = j - state.K
        w0 = state.omega[j]
        rho0[k] = l2_norm(state.rho[j], grid)
        if k == 0:
            M0[0] = l2_norm(w0, grid)
            continue
        M0[k] = (
            l2_norm(w0, grid)
            + R ** -2 * math.log(R) ** -1.5 * l2_norm(r ** 2 * w0, grid)
            + R ** 3 * l2_norm(w0 / r ** 3, grid)
            + R * l2_norm(grid.deriv @ w0, grid)
        )
    return M0, rho0


def energy_ledger(
    history: Iterable[SimState],
    params: FlowParams,
    weight: Optional[WeightParams] = None,
    eps0: float = 1.0,
    eps1: float = 1.0,
    single_dt: float = 1.0,
) -> EnergyLedger:
    """
    Функционалы E_k, H_k по истории состояний

    Плотность снимков проверяется пересчетом по каждому второму снимку:
    изменение любого E_k или H_k больше 2% помечает ledger как inconclusive.
    """
    history = list(history)
    if not history:
        raise PreconditionError("Пустая история состояний")
    K = history[0].K
    full = EnergyAccumulator(params, K, weight)
    for state in history:
        full.add(state)
    led = full.ledger(eps0, eps1, single_dt)

    if len(history) >= 3:
        sparse = EnergyAccumulator(params, K, weight)
        picks = history[::2]
        if (len(history) - 1) % 2:
            picks.append(history[-1])
        for state in picks:
            sparse.add(state)
        led.inconclusive = not _ledgers_agree(led, sparse.ledger(eps0, eps1, single_dt))
    return led


def _ledgers_agree(a: EnergyLedger, b: EnergyLedger, tol: float = 0.02) -> bool:
    scale = max([*a.E.values(), *a.H.values(), 0.0])
    for key in ('E', 'H'):
        da, db = getattr(a, key), getattr(b, key)
        for k, value in da.items():
            if abs(value - db.get(k, 0.0)) > tol * max(abs(value), 1.0e-12 * scale, 1.0e-300):
                return False
    return True


def _sum_pairs(E: Dict[int, float], F: Dict[int, float], k: int) -> float:
    """Σ_{l != 0} E_l F_{k−l} по модам в пределах усечения"""
    return sum(E[l] * F.get(k - l, 0.0) for l in E if l != 0)


def bootstrap_check(ledger: EnergyLedger, params: FlowParams, rho0_h1: float, C: float = 1.0) -> Dict[str, Any]:
    """
    Отношения левых частей бутстрап-неравенств к правым при константе C

    По модам: E_k и H_k против их оценок через начальные данные и
    квадратичные свертки; глобально: ΣE_k и ΣH_k против 2C(ΣM_k(0) + …).
    """
    nu, B, R = params.nu, abs(params.B), params.R
    if B == 0:
        raise PreconditionError("Бутстрап-оценки содержат |B|^{-1/2} и требуют B != 0")
    E, H = ledger.E, ledger.H
    quad = nu ** -0.5 * B ** -0.5 * R ** 2
    geom = math.sqrt(R / (R - 1.0)) * (1.0 + math.log(R))
    buoy = nu ** (-2 / 3) * B ** (-1 / 3) * R

    per_mode: Dict[str, Dict[int, float]] = {'E': {}, 'H': {}}
    for k in E:
        if k == 0:
            rhs_e = ledger.M0.get(0, 0.0) + quad * _sum_pairs(E, E, 0) + buoy * (H.get(1, 0.0) + H.get(-1, 0.0))
            rhs_h = quad * _sum_pairs(E, H, 0) + ledger.rho0.get(0, 0.0)
        else:
            rhs_e = ledger.M0.get(k, 0.0) + quad * geom * _sum_pairs(E, E, k) + buoy * (H.get(k + 1, 0.0) + H.get(k - 1, 0.0))
            rhs_h = ledger.rho0.get(k, 0.0) + quad * geom * _sum_pairs(E, H, k)
        per_mode['E'][k] = _safe_ratio(E[k], C * rhs_e)
        per_mode['H'][k] = _safe_ratio(H.get(k, 0.0), C * rhs_h)

    total_e_rhs = 2 * C * (sum(ledger.M0.values()) + rho0_h1 * R ** -1 * nu ** (-2 / 3) * B ** (-1 / 3))
    total_h_rhs = 2 * C * rho0_h1
    return {
        'per_mode': per_mode,
        'max_E_ratio': max(per_mode['E'].values(), default=0.0),
        'max_H_ratio': max(per_mode['H'].values(), default=0.0),
        'E_sum_ratio': _safe_ratio(ledger.E_sum, total_e_rhs),
        'H_sum_ratio': _safe_ratio(ledger.H_sum, total_h_rhs),
    }


def nonzero_energy(state: SimState) -> float:
    """Σ_{k != 0} ‖ω_k‖² в представлении weighted"""
    per_mode = np.abs(state.omega) ** 2 @ state.grid.quad_weights
    return float(np.sum(per_mode) - per_mode[state.K])


def fit_nonzero_decay(times: Sequence[float], energies: Sequence[float], horizon: float) -> Optional[Dict[str, Any]]:
    """
    Скорость затухания (Σ_{k != 0}‖ω_k‖²)^{1/2} по хвосту [T/2, T]

    Значения ниже UNDERFLOW_LEVEL отбрасываются. None, если в окне меньше
    трех точек (в том числе при нулевых данных).
    """
    t = np.asarray(times, dtype=float)
    amplitude = np.sqrt(np.asarray(energies, dtype=float))
    window = (t >= 0.5 * horizon) & (amplitude > UNDERFLOW_LEVEL)
    if np.count_nonzero(window) < 3:
        return None
    fit = linregress(t[window], np.log(amplitude[window]))
    return {
        'rate': -float(fit.slope),
        'r_squared': float(fit.rvalue ** 2),
        'window': [float(t[window][0]), float(t[window][-1])],
    }


def _safe_ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def scaling_constraint_ok(params: FlowParams) -> bool:
    """log R <= ν^{-1/3}|B|^{1/3}"""
    ok = math.log(params.R) <= params.nu ** (-1 / 3) * abs(params.B) ** (1 / 3)
    if not ok:
        log.warning(f"Нарушено ограничение log R <= ν^(-1/3)|B|^(1/3): R={params.R}, nu={params.nu}, B={params.B}")
    return ok


def rho_h1_norm(state: SimState) -> float:
    """‖ρ‖_{H¹} с мерой r dr dθ/2π через Парсеваля по модам"""
    grid = state.grid
    r = grid.nodes
    total = 0.0
    for j in range(2 * state.K + 1):
        k = j - state.K
        hat = state.rho[j] if k == 0 else state.rho[j] / np.sqrt(r)
        total += (
            l2_norm(np.sqrt(r) * hat, grid) ** 2
            + l2_norm(np.sqrt(r) * (grid.deriv @ hat), grid) ** 2
            + k * k * l2_norm(hat / np.sqrt(r), grid) ** 2
        )
    return math.sqrt(total)


def smallness_conditions(state: SimState, params: FlowParams, eps0: float, eps1: float) -> Dict[str, Any]:
    """
    Условия малости начальных данных

    cond1: R‖ω₀‖_{L²_θH¹_r} + R^{-2}(log R)^{-3/2}‖r²ω₀‖ + R³‖ω₀/r³‖ <= ε₀ν^{1/2}|B|^{1/2}R^{-2}
    (нормы с мерой dr), cond2: ‖ρ₀‖_{H¹} <= ε₁ν^{7/6}|B|^{5/6}R^{-3}.
    Вариант cond1 с (log R)^{-2/3} только сообщается.
    """
    grid = state.grid
    r = grid.nodes
    R = params.R
    h1 = r2 = r3 = 0.0
    for j in range(2 * state.K + 1):
        k = j - state.K
        hat = state.omega[j] if k == 0 else state.omega[j] / np.sqrt(r)
        h1 += h1r_norm(hat, grid) ** 2
        r2 += l2_norm(r ** 2 * hat, grid) ** 2
        r3 += l2_norm(hat / r ** 3, grid) ** 2
    base = R * math.sqrt(h1) + R ** 3 * math.sqrt(r3)
    cond1 = base + R ** -2 * math.log(R) ** -1.5 * math.sqrt(r2)
    variant = base + R ** -2 * math.log(R) ** (-2 / 3) * math.sqrt(r2)
    cond2 = rho_h1_norm(state)
    rhs = threshold_rhs(params, eps0, eps1)
    tol = 1.0 + 1.0e-9
    return {
        'cond1_lhs': cond1,
        'cond1_rhs': rhs['E'],
        'cond1_ok': cond1 <= rhs['E'] * tol,
        'cond1_variant_lhs': variant,
        'cond1_variant_ok': variant <= rhs['E'] * tol,
        'cond2_lhs': cond2,
        'cond2_rhs': rhs['H'],
        'cond2_ok': cond2 <= rhs['H'] * tol,
        'scaling_constraint_ok': scaling_constraint_ok(params),
    }


def sine_bump_family(params: FlowParams, grid: RadialGrid, eps0: float, eps1: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Начальные данные k = ±1: sin(π(r−1)/(R−1)) в представлении weighted

    ω₀ и ρ₀ нормированы так, что cond1 и cond2 выполняются с равенством.
    """
    K = params.K
    s = (grid.nodes - 1.0) / (params.R - 1.0)
    bump = np.sin(np.pi * s)
    omega = np.zeros((2 * K + 1, grid.n), dtype=complex)
    rho = np.zeros_like(omega)
    omega[K + 1] = omega[K - 1] = bump
    rho[K + 1] = rho[K - 1] = bump
    unit = initial_state(omega, rho, params, grid)
    cond = smallness_conditions(unit, params, eps0, eps1)
    omega *= cond['cond1_rhs'] / cond['cond1_lhs']
    rho *= cond['cond2_rhs'] / cond['cond2_lhs']
    return omega, rho


INIT_FAMILIES: Dict[str, Callable] = {'sine_bump': sine_bump_family}


def save_checkpoint(state: SimState, path: str, fmt: str = 'npz') -> Path:
    """Сохранить состояние (.npz с версией формата или NDJSON-строка)"""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    if fmt == 'npz':
        np.savez(
            p, format_version=CHECKPOINT_FORMAT_VERSION, t=state.t, K=state.K,
            R=state.grid.R, n=state.grid.n, omega=state.omega, rho=state.rho,
        )
    elif fmt == 'ndjson':
        record = {
            'format_version': CHECKPOINT_FORMAT_VERSION, 't': state.t, 'K': state.K,
            'R': state.grid.R, 'n': state.grid.n,
            'omega_re': state.omega.real.tolist(), 'omega_im': state.omega.imag.tolist(),
            'rho_re': state.rho.real.tolist(), 'rho_im': state.rho.imag.tolist(),
        }
        with open(p, 'a', encoding='utf-8') as fh:
            fh.write(json.dumps(record) + '\n')
    else:
        raise ParameterDomainError(f"Неизвестный формат контрольной точки: {fmt}")
    return p


def load_checkpoint(path: str, params: FlowParams) -> SimState:
    """Загрузить последнее сохраненное состояние"""
    p = Path(path)
    if p.suffix == '.npz':
        with np.load(p) as data:
            version = int(data['format_version'])
            record = {key: data[key] for key in ('t', 'K', 'R', 'n', 'omega', 'rho')}
    else:
        with open(p, 'r', encoding='utf-8') as fh:
            lines = [line for line in fh if line.strip()]
        if not lines:
            raise PreconditionError(f"Пустой файл контрольной точки: {p}")
        raw = json.loads(lines[-1])
        version = raw['format_version']
        record = {
            't': raw['t'], 'K': raw['K'], 'R': raw['R'], 'n': raw['n'],
            'omega': np.array(raw['omega_re']) + 1j * np.array(raw['omega_im']),
            'rho': np.array(raw['rho_re']) + 1j * np.array(raw['rho_im']),
        }
    if version != CHECKPOINT_FORMAT_VERSION:
        raise PreconditionError(f"Неподдерживаемая версия контрольной точки: {version}")
    if int(record['K']) != params.K or float(record['R']) != params.R:
        raise PreconditionError("Контрольная точка не соответствует параметрам (K, R)")
    grid = build_grid(params.R, int(record['n']))
    return initial_state(record['omega'], record['rho'], params, grid, t=float(record['t']))


def _csv_rows(acc: EnergyAccumulator, t: float, single_dt: float) -> List[List[Any]]:
    led = acc.ledger(single_dt=single_dt)
    rows = []
    for k in sorted(led.E):
        e, h = led.E_parts[k], led.H_parts[k]
        rows.append([
            t, k, e.get('sup', 0.0), e.get('l2', 0.0), e.get('inviscid', 0.0), e.get('dissipation', 0.0),
            h.get('sup', 0.0), h.get('l2', 0.0), h.get('dissipation', 0.0),
        ])
    return rows


def run_stability_experiment(
    params: FlowParams,
    init_family: Union[str, Callable] = 'sine_bump',
    amplitude: float = 1.0,
    horizon: Optional[float] = None,
    n: int = 32,
    weight: Optional[WeightParams] = None,
    eps0: float = 0.01,
    eps1: float = 0.01,
    stability_factor: float = 4.0,
    blowup_factor: float = 1.0e6,
    dt: Optional[float] = None,
    checkpoint_path: Optional[str] = None,
    checkpoint_every: int = 0,
    checkpoint_format: str = 'npz',
    energy_csv: Optional[str] = None,
    csv_every: int = 50,
) -> Tuple[ExperimentVerdict, EnergyLedger]:
    """
    Эксперимент на устойчивость

    Начальные данные семейства масштабируются на amplitude (amplitude = 1
    выполняет условия малости с равенством при ε₀, ε₁). Интегрирование до
    horizon (по умолчанию 10/скорость усиленной диссипации моды 1) или до
    взрыва решения.

    Вердикт stable требует ΣE/ΣE(0+) <= stability_factor и затухания
    ненулевых мод по хвосту [T/2, T] со скоростью не меньше половины
    скорости веса c′ для k = 1. Если подгонка невозможна (нулевые данные),
    проверка затухания не учитывается.

    Returns:
        (ExperimentVerdict, EnergyLedger)
    """
    if amplitude < 0:
        raise ParameterDomainError(f"amplitude должно быть >= 0, получено {amplitude}")
    family = INIT_FAMILIES.get(init_family) if isinstance(init_family, str) else init_family
    if family is None:
        raise ParameterDomainError(f"Неизвестное семейство начальных данных: {init_family}")

    grid = build_grid(params.R, n)
    omega0, rho0 = family(params, grid, eps0, eps1)
    state = initial_state(amplitude * omega0, amplitude * rho0, params, grid)
    conditions = smallness_conditions(state, params, eps0, eps1)
    rho_h1 = conditions['cond2_lhs']

    if weight is None:
        weight = default_weight(params, 1, n=n)
    if horizon is None:
        rate = params.enhanced_rate(1) if params.B != 0 else params.nu / params.R ** 2
        horizon = 10.0 / rate
    dt = dt or nonlinear_dt(state, params)

    acc = EnergyAccumulator(params, params.K, weight)
    sparse = EnergyAccumulator(params, params.K, weight)
    acc.add(state)
    sparse.add(state)
    baseline = acc.ledger(eps0, eps1, single_dt=dt).E_sum
    times, energies = [state.t], [nonzero_energy(state)]
    initial_size = float(np.sum(np.abs(state.omega)) + np.sum(np.abs(state.rho)))

    csv_fh = None
    writer = None
    if energy_csv:
        Path(energy_csv).parent.mkdir(parents=True, exist_ok=True)
        csv_fh = open(energy_csv, 'w', newline='', encoding='utf-8')
        writer = csv.writer(csv_fh)
        writer.writerow(ENERGY_CSV_COLUMNS)
        writer.writerows(_csv_rows(acc, state.t, dt))

    log.info(
        f"Эксперимент: nu={params.nu}, B={params.B}, R={params.R}, K={params.K}, "
        f"amplitude={amplitude}, horizon={horizon:.3e}, dt={dt:.3e}"
    )
    blowup = False
    step = 0
    try:
        while state.t < horizon * (1.0 - 1.0e-12):
            h = min(dt, horizon - state.t)
            limit = stable_dt(state, params)
            while h > limit:
                h *= 0.5
            state = step_nonlinear(state, h, params)
            step += 1
            size = float(np.sum(np.abs(state.omega)) + np.sum(np.abs(state.rho)))
            if not math.isfinite(size) or size > blowup_factor * max(initial_size, 1.0e-300):
                blowup = True
                log.warning(f"Взрыв решения при t={state.t:.3e}")
                break
            acc.add(state)
            times.append(state.t)
            energies.append(nonzero_energy(state))
            if step % 2 == 0:
                sparse.add(state)
            if writer is not None and step % csv_every == 0:
                writer.writerows(_csv_rows(acc, state.t, dt))
            if checkpoint_path and checkpoint_every and step % checkpoint_every == 0:
                save_checkpoint(state, checkpoint_path, checkpoint_format)
    finally:
        if csv_fh is not None:
            if writer is not None and not blowup:
                writer.writerows(_csv_rows(acc, state.t, dt))
            csv_fh.close()

    if not blowup and step % 2 == 1:
        sparse.add(state)
    if checkpoint_path:
        save_checkpoint(state, checkpoint_path, checkpoint_format)

    ledger = acc.ledger(eps0, eps1)
    if acc.count >= 3:
        ledger.inconclusive = not _ledgers_agree(ledger, sparse.ledger(eps0, eps1))

    ratio = _safe_ratio(ledger.E_sum, baseline)
    required = 0.5 * weight.rate(params, 1)
    decay = None if blowup else fit_nonzero_decay(times, energies, state.t)
    decay_ok = None if decay is None else decay['rate'] >= required
    if blowup:
        outcome = 'growth'
    elif ledger.inconclusive:
        outcome = 'inconclusive'
    elif ratio <= stability_factor and decay_ok is not False:
        outcome = 'stable'
    else:
        outcome = 'growth'
    if decay_ok is False:
        log.warning(f"Ненулевые моды затухают медленно: {decay['rate']:.3e} < {required:.3e}")

    conditions['bootstrap'] = bootstrap_check(ledger, params, rho_h1) if params.B != 0 else None
    conditions['conjugate_drift'] = conjugate_drift(state)
    verdict = ExperimentVerdict(
        outcome=outcome,
        sup_energy_ratio=ratio,
        horizon_reached=state.t,
        blowup=blowup,
        hypothesis_held=bool(conditions['cond1_ok'] and conditions['cond2_ok']),
        nonzero_decay_rate=None if decay is None else decay['rate'],
        required_decay_rate=required,
        decay_rate_ok=decay_ok,
        conditions=conditions,
    )
    log.info(f"Вердикт: {outcome}, ΣE/ΣE(0+) = {ratio:.3f}, t = {state.t:.3e}")
    return verdict, ledger
