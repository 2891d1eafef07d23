"""
Степенные законы по записям перебора
"""
import math
from typing import Any, Dict, List, Optional, Sequence

from utils import log, PreconditionError
from spectral.models import ScalingFit
from spectral.stability_analysis import power_law_fit

MIN_FIT_POINTS = 4


def get_field(record: Dict[str, Any], path: str) -> Optional[Any]:
    """Значение по пути через точку ('report.ratios.vorticity')"""
    value: Any = record
    for key in path.split('.'):
        if not isinstance(value, dict) or key not in value:
            return None
        value = value[key]
    return value


def fit_scaling(records: Sequence[Dict[str, Any]], x_field: str, y_field: str) -> ScalingFit:
    """
    Регрессия log y по log x

    Args:
        records: Записи (словари), поля по путям через точку
        x_field: Путь к x
        y_field: Путь к y

    Returns:
        ScalingFit (slope, intercept, r²)
    """
    points: List[tuple] = []
    dropped = 0
    for record in records:
        x, y = get_field(record, x_field), get_field(record, y_field)
        if not isinstance(x, (int, float)) or not isinstance(y, (int, float)):
            dropped += 1
            continue
        if not (x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)):
            dropped += 1
            continue
        points.append((float(x), float(y)))
    if dropped:
        log.warning(f"Регрессия {y_field} по {x_field}: отброшено {dropped} неположительных или пустых точек")
    if len(points) < MIN_FIT_POINTS:
        raise PreconditionError(f"Для регрессии нужно >= {MIN_FIT_POINTS} точек, есть {len(points)}")
    xs, ys = zip(*points)
    fit = power_law_fit(xs, ys)
    log.info(f"Регрессия {y_field} ~ {x_field}^{fit.slope:.4f} (r² = {fit.r_squared:.6f}, точек {len(points)})")
    return fit
