"""
Операторы одной азимутальной моды

Сборка 𝓛_ν = −ν(∂_r² − (k²−¼)/r²) + ikB/r² в слабой форме на базисе,
обращающемся в ноль на границах, эллиптические операторы для функции тока
(k != 0 и k = 0) и замена переменных f_k = r^{1/2} e^{ikAt} f̂_k.
"""
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from utils import log, PreconditionError, ConditioningError, ShapeMismatchError, ParameterDomainError
from spectral.models import FlowParams, RadialGrid, ModeField, OperatorBundle
from spectral.radial_grid import build_grid


def _stiffness(grid: RadialGrid, weight: np.ndarray) -> np.ndarray:
    """Dᵀ diag(weight) D на внутренних узлах"""
    DI = grid.deriv[:, grid.interior]
    return DI.T @ (weight[:, None] * DI)


def _factor_elliptic(elliptic: np.ndarray, k: int):
    try:
        return cho_factor(-elliptic)
    except LinAlgError as e:
        raise ConditioningError(f"Эллиптический оператор моды k={k} вырожден: {e}")


def assemble_Lnu(params: FlowParams, k: int, grid: RadialGrid) -> OperatorBundle:
    """
    Собрать 𝓛_ν и Δ_k для моды k != 0

    Форма Re⟨𝓛f, f⟩ = ν(‖f′‖² + (k²−¼)‖f/r‖²) выполняется точно
    (с той же квадратурой, что и в нормах).

    Args:
        params: Параметры течения
        k: Азимутальное число (!= 0)
        grid: Радиальная сетка

    Returns:
        OperatorBundle
    """
    if k == 0:
        raise PreconditionError("Для k = 0 используйте assemble_zero_mode")
    if grid.R != params.R:
        raise ParameterDomainError(f"Сетка построена для R={grid.R}, параметры R={params.R}")

    I = grid.interior
    w = grid.quad_weights
    r = grid.nodes[I]
    stiff = _stiffness(grid, w)
    potential = np.diag(w[I] / r ** 2)
    shift = k * k - 0.25

    stiffness = params.nu * (stiff + shift * potential) + 1j * k * params.B * potential
    elliptic = -(stiff + shift * potential)

    return OperatorBundle(
        k=k,
        params=params,
        grid=grid,
        mass=w[I].copy(),
        stiffness=stiffness,
        elliptic=elliptic,
        elliptic_factor=_factor_elliptic(elliptic, k),
    )


def assemble_zero_mode(params: FlowParams, grid: RadialGrid) -> OperatorBundle:
    """
    Операторы нулевой моды в исходных (hat) переменных

    Скалярное произведение с весом r: ⟨(∂² + r^{-1}∂)f, g⟩_r = −∫ r f′ ḡ′ dr.
    stiffness - диффузия −ν(∂² + r^{-1}∂) для ω_=, ρ_=, elliptic - ∂² + r^{-1}∂ для φ_=.
    """
    if grid.R != params.R:
        raise ParameterDomainError(f"Сетка построена для R={grid.R}, параметры R={params.R}")

    I = grid.interior
    wr = grid.quad_weights * grid.nodes
    stiff = _stiffness(grid, wr)
    elliptic = -stiff
    return OperatorBundle(
        k=0,
        params=params,
        grid=grid,
        mass=wr[I].copy(),
        stiffness=params.nu * stiff.astype(complex),
        elliptic=elliptic,
        elliptic_factor=_factor_elliptic(elliptic, 0),
    )


@lru_cache(maxsize=256)
def get_bundle(params: FlowParams, k: int, n: int) -> OperatorBundle:
    """Кэшированная сборка операторов моды k на сетке (params.R, n)"""
    grid = build_grid(params.R, n)
    log.debug(f"Сборка операторов: k={k}, nu={params.nu}, B={params.B}, R={params.R}, n={n}")
    if k == 0:
        return assemble_zero_mode(params, grid)
    return assemble_Lnu(params, k, grid)


def solve_elliptic(values: np.ndarray, bundle: OperatorBundle) -> np.ndarray:
    """Δ_k φ = ω с φ(1) = φ(R) = 0 для массива узловых значений"""
    grid = bundle.grid
    if values.shape != (grid.n,):
        raise ShapeMismatchError(f"Поле размера {values.shape} на сетке n={grid.n}")
    I = grid.interior
    rhs = bundle.mass * values[I]
    phi = np.zeros(grid.n, dtype=complex)
    phi[I] = -cho_solve(bundle.elliptic_factor, rhs)
    return phi


def solve_stream(omega: ModeField, bundle: OperatorBundle) -> ModeField:
    """
    Функция тока моды по завихренности

    Args:
        omega: Завихренность (weighted для k != 0, hat для k = 0)
        bundle: Операторы той же моды

    Returns:
        φ в том же представлении
    """
    if omega.k != bundle.k:
        raise PreconditionError(f"Мода поля k={omega.k} не совпадает с модой операторов k={bundle.k}")
    expected = 'hat' if bundle.k == 0 else 'weighted'
    if omega.rep != expected:
        raise PreconditionError(f"Для k={bundle.k} ожидается представление {expected}, получено {omega.rep}")
    phi = solve_elliptic(omega.values, bundle)
    return ModeField(k=omega.k, values=phi, rep=omega.rep, grid=omega.grid)


def apply_laplacian(values: np.ndarray, bundle: OperatorBundle) -> np.ndarray:
    """
    Сильная (коллокационная) форма эллиптического оператора

    k != 0: ∂² − (k²−¼)/r²; k = 0: ∂² + r^{-1}∂. Годится для профилей
    без нулевых граничных значений.
    """
    grid = bundle.grid
    r = grid.nodes
    if bundle.k == 0:
        return grid.deriv2 @ values + (grid.deriv @ values) / r
    return grid.deriv2 @ values - (bundle.k ** 2 - 0.25) * values / r ** 2


def mode_transform(
    f: ModeField,
    t: float,
    direction: Literal['hat_to_weighted', 'weighted_to_hat'],
    A: float,
) -> ModeField:
    """
    Переход между f̂_k и f_k = r^{1/2} e^{ikAt} f̂_k

    Args:
        f: Поле
        t: Время
        direction: Направление перехода
        A: Коэффициент твердотельного вращения

    Returns:
        Поле в другом представлении
    """
    r = f.grid.nodes
    factor = np.sqrt(r) * np.exp(1j * f.k * A * t)
    if direction == 'hat_to_weighted':
        if f.rep != 'hat':
            raise PreconditionError("Ожидается поле в представлении hat")
        return ModeField(k=f.k, values=f.values * factor, rep='weighted', grid=f.grid)
    if direction == 'weighted_to_hat':
        if f.rep != 'weighted':
            raise PreconditionError("Ожидается поле в представлении weighted")
        return ModeField(k=f.k, values=f.values / factor, rep='hat', grid=f.grid)
    raise PreconditionError(f"Неизвестное направление: {direction}")
