"""
Модели данных спектрального стенда
"""
import math
from typing import List, Optional, Dict, Any, Tuple, Callable, Literal
import numpy as np
from pydantic import BaseModel, Field, field_validator


class FlowParams(BaseModel):
    """Физические и численные параметры течения (ν = μ зашито)"""
    nu: float = Field(1.0e-2, gt=0)
    A: float = 1.0
    B: float = 1.0
    R: float = Field(2.0, gt=1)
    g_scale: float = 1.0
    K: int = Field(8, ge=1)

    class Config:
        frozen = True

    def with_updates(self, **changes) -> 'FlowParams':
        """Копия с измененными полями (с повторной валидацией)"""
        return FlowParams(**{**self.model_dump(), **changes})

    def regime(self, k: int) -> str:
        """Режим моды: 'enhanced' при νk² ≤ |B|, иначе 'diffusive'"""
        return 'enhanced' if self.nu * k * k <= abs(self.B) else 'diffusive'

    def enhanced_rate(self, k: int) -> float:
        """Масштаб (νk²)^{1/3}|B|^{2/3}R^{-2}"""
        return (self.nu * k * k) ** (1.0 / 3.0) * abs(self.B) ** (2.0 / 3.0) / self.R ** 2


class RadialGrid(BaseModel):
    """Радиальная сетка на [1, R]: узлы, производная, квадратура"""
    R: float
    n: int
    nodes: np.ndarray
    quad_weights: np.ndarray
    deriv: np.ndarray
    deriv2: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def interior(self) -> slice:
        """Срез внутренних узлов (без граничных)"""
        return slice(1, self.n - 1)

    def same_as(self, other: 'RadialGrid') -> bool:
        return self.n == other.n and self.R == other.R


class NormReport(BaseModel):
    """Нормы радиального профиля"""
    l2: float = 0.0
    h1r: float = 0.0
    h1r_dual: float = 0.0
    linf: float = 0.0


class ModeField(BaseModel):
    """Комплексный радиальный профиль одной азимутальной моды"""
    k: int
    values: np.ndarray
    rep: Literal['hat', 'weighted'] = 'weighted'
    grid: RadialGrid

    class Config:
        arbitrary_types_allowed = True

    @field_validator('values', mode='before')
    @classmethod
    def _as_complex(cls, v):
        return np.asarray(v, dtype=complex)

    def with_values(self, values: np.ndarray) -> 'ModeField':
        """Тот же k/rep/сетка, новые значения"""
        return ModeField(k=self.k, values=values, rep=self.rep, grid=self.grid)


class OperatorBundle(BaseModel):
    """
    Дискретные операторы одной моды в слабой (галеркинской) форме

    Неизвестные - значения во внутренних узлах. Для k != 0 масса W (веса
    квадратуры), для k = 0 масса W·r. stiffness - матрица формы
    ⟨𝓛 f, g⟩ = g^H A f, elliptic - матрица слабой формы Δ_k.
    """
    k: int
    params: FlowParams
    grid: RadialGrid
    mass: np.ndarray
    stiffness: np.ndarray
    elliptic: np.ndarray
    elliptic_factor: Tuple[np.ndarray, bool]

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def L(self) -> np.ndarray:
        """Оператор 𝓛_ν на внутренних узлах"""
        return self.stiffness / self.mass[:, None]

    @property
    def Delta_k(self) -> np.ndarray:
        """Эллиптический оператор на внутренних узлах"""
        return self.elliptic / self.mass[:, None]

    def weighted(self, shift: complex = 0.0) -> np.ndarray:
        """W^{-1/2}(A + shift·W)W^{-1/2} - матрица в евклидовой геометрии"""
        s = np.sqrt(self.mass)
        matrix = self.stiffness + shift * np.diag(self.mass)
        return matrix / s[:, None] / s[None, :]

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Применить 𝓛_ν к полному вектору узловых значений"""
        out = np.zeros(self.grid.n, dtype=complex)
        out[self.grid.interior] = self.L @ values[self.grid.interior]
        return out


class ResolventSample(BaseModel):
    """Один замер резольвенты для оценок четырех семейств"""
    lam: float
    F_norms: Tuple[float, float]
    sol_norms: Tuple[float, float, float, float, float]
    ratios: Tuple[float, float, float, float]


class SpectralGapResult(BaseModel):
    """Результат поиска спектральной щели Ψ"""
    psi: float
    argmin_lambda: float
    lambda_lo: float
    lambda_hi: float
    lambda_steps: int
    grid_min: float
    range_warning: bool = False


class ScalingFit(BaseModel):
    """Степенная регрессия в логарифмических координатах"""
    slope: float
    intercept: float
    r_squared: float
    points: List[Tuple[float, float]] = []

    def predict(self, x: float) -> float:
        return math.exp(self.intercept) * x ** self.slope


class WeightParams(BaseModel):
    """Экспоненциальный вес 𝓔_k = exp(c'(νk²)^{1/3}|B|^{2/3}R^{-2} t)"""
    c_prime: float = Field(0.0, ge=0)

    def rate(self, params: FlowParams, k: int) -> float:
        if k == 0 or self.c_prime == 0.0:
            return 0.0
        return self.c_prime * params.enhanced_rate(k)


class ForcingSpec(BaseModel):
    """Вынуждающая сила h₁ − g ∂_r h₂"""
    h1: Optional[Callable[[float], np.ndarray]] = None
    h2: Optional[Callable[[float], np.ndarray]] = None
    g: Optional[np.ndarray] = None
    g_prime: Optional[np.ndarray] = None

    class Config:
        arbitrary_types_allowed = True

    @property
    def is_zero(self) -> bool:
        return self.h1 is None and (self.h2 is None or self.g is None)


class SpaceTimeLedger(BaseModel):
    """
    Накопители пространственно-временных норм

    linf_l2 - текущий максимум; l2_l2 и l2_linf - интегралы по времени
    от квадратов норм (трапеции по принятым шагам).
    """
    linf_l2: Dict[str, float] = Field(default_factory=dict)
    l2_l2: Dict[str, float] = Field(default_factory=dict)
    l2_linf: Dict[str, float] = Field(default_factory=dict)
    dt_log: List[float] = Field(default_factory=list)

    def l2l2(self, name: str) -> float:
        """‖·‖_{L²_t L²_r} по накопленному интегралу квадрата"""
        return math.sqrt(self.l2_l2.get(name, 0.0))

    def l2linf(self, name: str) -> float:
        return math.sqrt(self.l2_linf.get(name, 0.0))

    def sup(self, name: str) -> float:
        return self.linf_l2.get(name, 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()


class EnergyLedger(BaseModel):
    """Функционалы E_k, H_k и начальная энергия M_k(0)"""
    E: Dict[int, float] = Field(default_factory=dict)
    H: Dict[int, float] = Field(default_factory=dict)
    E_parts: Dict[int, Dict[str, float]] = Field(default_factory=dict)
    H_parts: Dict[int, Dict[str, float]] = Field(default_factory=dict)
    M0: Dict[int, float] = Field(default_factory=dict)
    rho0: Dict[int, float] = Field(default_factory=dict)
    threshold_rhs: Dict[str, float] = Field(default_factory=dict)
    E_sum: float = 0.0
    H_sum: float = 0.0
    inconclusive: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Словарь с ключами-строками для JSON"""
        data = self.model_dump()
        for key in ('E', 'H', 'E_parts', 'H_parts', 'M0', 'rho0'):
            data[key] = {str(k): v for k, v in data[key].items()}
        return data


class ExperimentVerdict(BaseModel):
    """Вердикт эксперимента на устойчивость"""
    outcome: Literal['stable', 'growth', 'inconclusive']
    sup_energy_ratio: float
    horizon_reached: float
    blowup: bool = False
    hypothesis_held: bool = False
    nonzero_decay_rate: Optional[float] = None
    required_decay_rate: Optional[float] = None
    decay_rate_ok: Optional[bool] = None
    conditions: Dict[str, Any] = Field(default_factory=dict)


class SimState(BaseModel):
    """
    Состояние усеченной нелинейной системы

    Массивы формы (2K+1, n), строка j соответствует моде k = j − K.
    Моды k != 0 хранятся в представлении weighted, нулевая мода (строка K) -
    в исходных переменных ω_=, ρ_=. phi пересчитывается по omega.
    """
    t: float = 0.0
    K: int
    grid: RadialGrid
    omega: np.ndarray
    rho: np.ndarray
    phi: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    def index(self, k: int) -> int:
        return k + self.K

    def mode(self, k: int, name: str = 'omega') -> ModeField:
        """Поле моды k (hat для k = 0)"""
        values = getattr(self, name)[self.index(k)]
        return ModeField(k=k, values=values, rep='hat' if k == 0 else 'weighted', grid=self.grid)

    def zero_weighted(self, name: str = 'omega') -> np.ndarray:
        """Взвешенный вид нулевой моды r^{1/2} f_="""
        return np.sqrt(self.grid.nodes) * getattr(self, name)[self.K]
