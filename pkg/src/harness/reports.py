"""
Вывод записей перебора: NDJSON, CSV и текстовые колонки для графиков
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from utils import log, UsageError
from harness.scaling import get_field
from harness.experiments import PLOT_FIELDS

REPORT_FORMATS = ('csv', 'ndjson', 'plotdata')
LEADING_COLUMNS = ['index', 'experiment', 'variable', 'value', 'status', 'seed', 'config_hash']


def to_jsonable(obj: Any) -> Any:
    """Привести numpy-типы, модели и ключи словарей к виду, пригодному для JSON"""
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {'re': float(obj.real), 'im': float(obj.imag)}
    return obj


def record_line(record: Dict[str, Any]) -> str:
    """Каноническая строка NDJSON (ключи отсортированы)"""
    return json.dumps(to_jsonable(record), sort_keys=True, ensure_ascii=False)


def write_ndjson(records: Iterable[Dict[str, Any]], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(record_line(record) + '\n')
    return path


def read_ndjson(path: Path) -> List[Dict[str, Any]]:
    """Прочитать записи NDJSON (пустые строки пропускаются)"""
    records = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if line.strip():
                records.append(json.loads(line))
    return records


def flatten(record: Dict[str, Any], prefix: str = '') -> Dict[str, Any]:
    """Плоский словарь с путями через точку; списки сохраняются строкой JSON"""
    flat: Dict[str, Any] = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + '.'))
        elif isinstance(value, list):
            flat[name] = json.dumps(value, sort_keys=True, ensure_ascii=False)
        else:
            flat[name] = value
    return flat


def csv_columns(rows: Sequence[Dict[str, Any]]) -> List[str]:
    """Порядок колонок: служебные поля, затем остальные по алфавиту"""
    keys = set()
    for row in rows:
        keys.update(row)
    leading = [c for c in LEADING_COLUMNS if c in keys]
    return leading + sorted(keys - set(leading))


def write_csv(records: Sequence[Dict[str, Any]], path: Path) -> Path:
    rows = [flatten(to_jsonable(r)) for r in records]
    columns = csv_columns(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=columns, restval='')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def write_plotdata(
    records: Sequence[Dict[str, Any]],
    path: Path,
    x_field: Optional[str] = None,
    y_field: Optional[str] = None,
) -> Path:
    """
    Две колонки через пробел с заголовком-комментарием

    По умолчанию x - значение оси перебора, y - основная величина эксперимента.
    """
    first = records[0]
    experiment = first.get('experiment', '')
    x_field = x_field or 'value'
    y_field = y_field or PLOT_FIELDS.get(experiment, 'value')
    x_name = first.get('variable', 'x') if x_field == 'value' else x_field.split('.')[-1]
    y_name = y_field.split('.')[-1]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    hashes = sorted({r.get('config_hash', '') for r in records})
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"# experiment: {experiment}\n")
        f.write(f"# config_hash: {', '.join(hashes)}\n")
        f.write(f"# columns: {x_name} {y_name}\n")
        for record in records:
            x, y = get_field(record, x_field), get_field(record, y_field)
            if x is None or y is None or not isinstance(y, (int, float)):
                continue
            f.write(f"{float(x):.17g} {float(y):.17g}\n")
    return path


def emit_report(
    records: Sequence[Dict[str, Any]],
    fmt: str,
    out_dir: Path,
    stem: str = 'report',
) -> List[Path]:
    """
    Записать отчет в выбранном формате

    Args:
        records: Непустой список записей
        fmt: csv | ndjson | plotdata
        out_dir: Каталог результатов
        stem: Базовое имя файла

    Returns:
        Список записанных файлов
    """
    if not records:
        raise UsageError("Нет записей для отчета")
    if fmt not in REPORT_FORMATS:
        raise UsageError(f"Неизвестный формат отчета: {fmt}. Доступные: {', '.join(REPORT_FORMATS)}")
    out_dir = Path(out_dir)
    if fmt == 'ndjson':
        path = write_ndjson(records, out_dir / f"{stem}.ndjson")
    elif fmt == 'csv':
        path = write_csv(records, out_dir / f"{stem}.csv")
    else:
        path = write_plotdata(records, out_dir / f"{stem}.dat")
    log.info(f"Отчет записан: {path}")
    return [path]
