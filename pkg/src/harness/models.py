"""
Модели конфигурации запуска и результатов стенда
"""
import hashlib
import json
from pathlib import Path
from typing import List, Optional, Dict, Any, Literal, Tuple
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from utils import config, log, UsageError
from spectral.models import FlowParams, ScalingFit

EXPERIMENT_NAMES = (
    'grid', 'elliptic', 'resolvent', 'gap', 'accretivity', 'semigroup',
    'decay', 'spacetime', 'simulate', 'threshold',
)
SWEEP_VARIABLES = ('nu', 'B', 'R', 'k', 'epsilon')


class GridSpec(BaseModel):
    """Радиальная сетка: R берется из params, если не задано"""
    R: Optional[float] = Field(None, gt=1)
    n: int = Field(48, ge=8)


class SweepSpec(BaseModel):
    """Ось перебора параметров"""
    variable: Literal['nu', 'B', 'R', 'k', 'epsilon'] = 'nu'
    values: List[float] = Field(default_factory=list)

    @model_validator(mode='after')
    def _check_values(self):
        if self.variable == 'nu' and any(v <= 0 for v in self.values):
            raise ValueError("Значения nu должны быть > 0")
        if self.variable == 'R' and any(v <= 1 for v in self.values):
            raise ValueError("Значения R должны быть > 1")
        if self.variable == 'epsilon' and any(v < 0 for v in self.values):
            raise ValueError("Значения epsilon должны быть >= 0")
        if self.variable == 'k' and any(v != int(v) for v in self.values):
            raise ValueError("Значения k должны быть целыми")
        return self


class ExperimentOptions(BaseModel):
    """Параметры экспериментов (каждый эксперимент берет свои)"""
    k: int = 1
    k_list: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16])
    trials: int = Field(20, ge=1)
    lambda_steps: int = Field(129, ge=64)
    t_grid: List[float] = Field(default_factory=lambda: [0.5, 1.0, 5.0, 10.0, 50.0])
    horizon: Optional[float] = Field(None, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    regime: Optional[Literal['enhanced', 'diffusive']] = None
    weighted: bool = True
    forced: bool = False
    amplitude: float = Field(1.0, ge=0)
    init_family: str = 'sine_bump'
    eps0: float = Field(0.01, gt=0)
    eps1: float = Field(0.01, gt=0)
    stability_factor: float = Field(4.0, gt=1)
    eps_range: Tuple[float, float] = (0.1, 10.0)
    bisect_rel_width: float = Field(0.05, gt=0, lt=1)

    @field_validator('eps_range')
    @classmethod
    def _check_range(cls, v):
        lo, hi = v
        if not 0 < lo < hi:
            raise ValueError("eps_range должен удовлетворять 0 < lo < hi")
        return v


class RunConfig(BaseModel):
    """
    Конфигурация запуска

    Хеш конфигурации считается по всем полям, кроме output_dir и jobs:
    они не влияют на результаты.
    """
    params: FlowParams = Field(default_factory=FlowParams)
    grid: GridSpec = Field(default_factory=GridSpec)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    experiment: Literal[
        'grid', 'elliptic', 'resolvent', 'gap', 'accretivity', 'semigroup',
        'decay', 'spacetime', 'simulate', 'threshold',
    ] = 'gap'
    seed: int = 0
    output_dir: Optional[str] = None
    jobs: Optional[int] = Field(None, ge=1)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    options: ExperimentOptions = Field(default_factory=ExperimentOptions)

    @model_validator(mode='after')
    def _sync_grid(self):
        if self.grid.R is None:
            self.grid.R = self.params.R
        elif self.grid.R != self.params.R:
            raise ValueError(f"grid.R={self.grid.R} не совпадает с params.R={self.params.R}")
        return self

    def config_hash(self) -> str:
        """SHA-256 канонического JSON (ключи отсортированы)"""
        data = self.model_dump(mode='json', exclude={'output_dir', 'jobs'})
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'), ensure_ascii=False)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def resolve_output_dir(self) -> Path:
        """Каталог результатов: OUTPUT_DIR из окружения, затем конфиг, затем config.yaml"""
        if config.settings.output_dir:
            return Path(config.settings.output_dir)
        if self.output_dir:
            return Path(self.output_dir)
        return config.get_output_dir()

    def resolve_jobs(self) -> int:
        if config.settings.jobs:
            return int(config.settings.jobs)
        return int(self.jobs or config.get_jobs())


class SweepPoint(BaseModel):
    """Одна точка перебора с примененным значением"""
    index: int
    value: Optional[float] = None
    params: FlowParams
    n: int
    options: ExperimentOptions
    seed: int


class ThresholdResult(BaseModel):
    """Результат бисекции порога ε* по ν"""
    nu_values: List[float] = Field(default_factory=list)
    eps_star: List[Optional[float]] = Field(default_factory=list)
    fitted_alpha: Optional[ScalingFit] = None
    fitted_alpha_size: Optional[ScalingFit] = None
    bracket_width: List[Optional[float]] = Field(default_factory=list)
    brackets: List[Optional[Tuple[float, float]]] = Field(default_factory=list)
    conditions_at_eps_star: List[Optional[Dict[str, Any]]] = Field(default_factory=list)
    inconclusive: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def is_inconclusive(self) -> bool:
        return bool(self.inconclusive)


def load_run_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """
    Загрузить RunConfig из YAML

    Args:
        path: Путь к документу; по умолчанию config.yaml в корне проекта
        **overrides: Значения верхнего уровня (seed, output_dir, jobs), None пропускаются

    Returns:
        Проверенный RunConfig
    """
    if path is None:
        data = dict(config.data)
        source = str(config.config_path)
    else:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"Файл конфигурации не найден: {p}")
        try:
            data = config.read_yaml(p)
        except Exception as e:
            raise UsageError(f"Ошибка чтения YAML {p}: {e}")
        source = str(p)

    if not isinstance(data, dict):
        raise UsageError(f"Конфигурация {source} должна быть словарем")
    data.update({key: value for key, value in overrides.items() if value is not None})

    experiment = data.get('experiment')
    if experiment is not None and experiment not in EXPERIMENT_NAMES:
        raise UsageError(f"Неизвестный эксперимент: {experiment}")

    try:
        run_config = RunConfig(**data)
    except ValidationError as e:
        raise UsageError(f"Некорректная конфигурация {source}: {e}")

    log.debug(f"Конфигурация {source}: эксперимент={run_config.experiment}, hash={run_config.config_hash()[:12]}")
    return run_config
