"""
Радиальная дискретизация отрезка [1, R]

Узлы Чебышёва–Гаусса–Лобатто, отображенные аффинно на [1, R], матрица
дифференцирования, веса Кленшоу–Кёртиса и все нормы, в которых записаны
оценки: L², H¹_r, двойственная H^{-1}_r и максимум-норма.
"""
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from utils import log, ParameterDomainError, ShapeMismatchError, PreconditionError, ConditioningError
from spectral.models import RadialGrid, NormReport, ModeField

FieldLike = Union[ModeField, np.ndarray]


def _values(f: FieldLike) -> np.ndarray:
    """Узловые значения поля или массива"""
    if isinstance(f, ModeField):
        return f.values
    return np.asarray(f)


def _chebyshev_matrix(n: int):
    """
    Матрица дифференцирования на узлах x_j = -cos(πj/N), j = 0..N

    Разности узлов считаются через синусы, диагональ - через отрицательную
    сумму строки, так что производная константы равна нулю точно.
    """
    N = n - 1
    theta = np.pi * np.arange(n) / N
    x = -np.cos(theta)
    x[0], x[-1] = -1.0, 1.0

    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(n)

    ti, tj = np.meshgrid(theta, theta, indexing='ij')
    # x_i - x_j = 2 sin((θ_i+θ_j)/2) sin((θ_i-θ_j)/2)
    dx = 2.0 * np.sin(0.5 * (ti + tj)) * np.sin(0.5 * (ti - tj))
    np.fill_diagonal(dx, 1.0)

    D = np.outer(c, 1.0 / c) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return x, D


def _clenshaw_curtis(n: int) -> np.ndarray:
    """Веса Кленшоу–Кёртиса на [-1, 1] для n узлов Лобатто"""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    inner = theta[1:-1]
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[-1] = 1.0 / (N * N - 1)
        for j in range(1, N // 2):
            v -= 2.0 * np.cos(2 * j * inner) / (4 * j * j - 1)
        v -= np.cos(N * inner) / (N * N - 1)
    else:
        w[0] = w[-1] = 1.0 / (N * N)
        for j in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * j * inner) / (4 * j * j - 1)
    w[1:-1] = 2.0 * v / N
    return w


@lru_cache(maxsize=64)
def build_grid(R: float, n: int) -> RadialGrid:
    """
    Построить радиальную сетку

    Args:
        R: Отношение радиусов (> 1)
        n: Число узлов (>= 8)

    Returns:
        RadialGrid с узлами, производной и весами квадратуры
    """
    if not R > 1.0:
        raise ParameterDomainError(f"R должно быть > 1, получено {R}")
    if n < 8:
        raise ParameterDomainError(f"n должно быть >= 8, получено {n}")

    x, Dx = _chebyshev_matrix(n)
    scale = 2.0 / (R - 1.0)
    nodes = 1.0 + (R - 1.0) * (x + 1.0) / 2.0
    nodes[0], nodes[-1] = 1.0, float(R)

    deriv = Dx * scale
    deriv2 = deriv @ deriv
    np.fill_diagonal(deriv2, 0.0)
    np.fill_diagonal(deriv2, -deriv2.sum(axis=1))

    weights = _clenshaw_curtis(n) * (R - 1.0) / 2.0

    for arr in (nodes, weights, deriv, deriv2):
        arr.setflags(write=False)

    log.debug(f"Сетка построена: R={R}, n={n}")
    return RadialGrid(R=float(R), n=n, nodes=nodes, quad_weights=weights, deriv=deriv, deriv2=deriv2)


def inner_product(f: FieldLike, g: FieldLike, grid: RadialGrid) -> complex:
    """⟨f, g⟩ = ∫₁^R f ḡ dr по квадратуре"""
    fv, gv = _values(f), _values(g)
    if fv.shape != (grid.n,) or gv.shape != (grid.n,):
        raise ShapeMismatchError(
            f"Размеры полей {fv.shape}, {gv.shape} не совпадают с сеткой n={grid.n}"
        )
    return complex(np.sum(grid.quad_weights * fv * np.conj(gv)))


def l2_norm(f: FieldLike, grid: RadialGrid) -> float:
    """‖f‖ в L²(dr)"""
    fv = _values(f)
    return float(np.sqrt(np.sum(grid.quad_weights * np.abs(fv) ** 2)))


@lru_cache(maxsize=64)
def h1r_gram(R: float, n: int) -> np.ndarray:
    """Матрица Грама ‖f‖²_{H¹_r} = f^H S f на внутренних узлах"""
    grid = build_grid(R, n)
    I = grid.interior
    DI = grid.deriv[:, I]
    w = grid.quad_weights
    S = DI.T @ (w[:, None] * DI) + np.diag(w[I] / grid.nodes[I] ** 2)
    S.setflags(write=False)
    return S


@lru_cache(maxsize=64)
def _dual_factor(R: float, n: int):
    """Холецкий для формы (−∂² + r^{-2}) на внутренних узлах"""
    S = h1r_gram(R, n)
    try:
        return cho_factor(S)
    except LinAlgError as e:
        raise ConditioningError(f"Вырожденная вспомогательная задача для H^-1: {e}")


def h1r_dual_norm(f: FieldLike, grid: RadialGrid) -> float:
    """
    Двойственная норма ‖f‖_{H^{-1}_r} через решение (−∂² + r^{-2})u = f

    Пробное пространство - функции, обращающиеся в ноль на r = 1, R.
    """
    fv = _values(f)
    I = grid.interior
    rhs = grid.quad_weights[I] * fv[I]
    u = cho_solve(_dual_factor(grid.R, grid.n), rhs)
    value = float(np.real(np.vdot(u, rhs)))
    return float(np.sqrt(max(value, 0.0)))


def h1r_norm(f: FieldLike, grid: RadialGrid) -> float:
    """‖f‖²_{H¹_r} = ‖f′‖² + ‖f/r‖²"""
    fv = _values(f)
    return float(np.sqrt(l2_norm(grid.deriv @ fv, grid) ** 2 + l2_norm(fv / grid.nodes, grid) ** 2))


def norms(f: FieldLike, grid: RadialGrid) -> NormReport:
    """
    Полный набор норм профиля

    Args:
        f: Поле или массив узловых значений
        grid: Сетка

    Returns:
        NormReport
    """
    fv = _values(f)
    if fv.shape != (grid.n,):
        raise ShapeMismatchError(f"Поле размера {fv.shape} на сетке n={grid.n}")
    return NormReport(
        l2=l2_norm(fv, grid),
        h1r=h1r_norm(fv, grid),
        h1r_dual=h1r_dual_norm(fv, grid),
        linf=float(np.max(np.abs(fv))) if fv.size else 0.0,
    )


def padded_samples(K: int) -> int:
    """Четное число θ-узлов без алиасинга для билинейных членов с модами |k| <= K+1"""
    m = 3 * (K + 1) + 1
    return m + (m % 2)


def _mode_items(modes) -> Iterable:
    if isinstance(modes, Mapping):
        return [(int(k), _values(v)) for k, v in modes.items()]
    return [(f.k, f.values) for f in modes]


def to_physical_evaluation(modes, m: int, real: bool = False) -> np.ndarray:
    """
    Синтез f(r, θ) = Σ_k f_k(r) e^{ikθ} на равномерной θ-сетке

    Args:
        modes: Словарь k -> профиль или список ModeField
        m: Число θ-узлов, θ_j = 2πj/m
        real: Вернуть вещественную часть (для сопряженно-симметричных мод)

    Returns:
        Массив формы (n, m)
    """
    items = _mode_items(modes)
    if not items:
        raise PreconditionError("Нет мод для синтеза")
    n = items[0][1].shape[0]
    columns = np.zeros((n, m), dtype=complex)
    used = set()
    for k, vals in items:
        if 2 * abs(k) > m:
            raise PreconditionError(f"Алиасинг: мода k={k} при m={m}")
        col = k % m
        if col in used:
            raise PreconditionError(f"Моды k={k} и {k - m if k > 0 else k + m} совпадают при m={m}")
        used.add(col)
        columns[:, col] = vals
    field = np.fft.ifft(columns, axis=1) * m
    return field.real if real else field


def forward_transform(field: np.ndarray, K: int) -> Dict[int, np.ndarray]:
    """Обратно к модам |k| <= K: f_k = (1/m) Σ_j f(θ_j) e^{-ikθ_j}"""
    m = field.shape[1]
    if 2 * K > m:
        raise PreconditionError(f"Алиасинг: K={K} при m={m}")
    coeffs = np.fft.fft(field, axis=1) / m
    return {k: coeffs[:, k % m].copy() for k in range(-K, K + 1)}


def random_dirichlet_field(
    grid: RadialGrid,
    rng: np.random.Generator,
    n_modes: int = 8,
    power: float = 2.0,
    complex_valued: bool = True,
) -> np.ndarray:
    """
    Гладкое случайное поле с нулями на границах

    Σ_j c_j j^{-power} sin(jπ(r−1)/(R−1)), c_j ~ N(0,1) (комплексные).
    """
    s = (grid.nodes - 1.0) / (grid.R - 1.0)
    j = np.arange(1, n_modes + 1)
    coeffs = rng.standard_normal(n_modes)
    if complex_valued:
        coeffs = coeffs + 1j * rng.standard_normal(n_modes)
    coeffs = coeffs * j ** (-power)
    values = np.sin(np.pi * np.outer(s, j)) @ coeffs
    values = np.asarray(values, dtype=complex)
    values[0] = values[-1] = 0.0
    return values
