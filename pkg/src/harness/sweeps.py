"""
Перебор параметров на ограниченном пуле воркеров

Точки перебора независимы: каждая получает свое зерно из SeedSequence
(seed, index) и выполняется в пуле потоков. Результаты собираются через
asyncio.gather и сортируются по индексу точки, поэтому порядок завершения
не влияет на вывод.
"""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from utils import log
from harness.models import RunConfig, SweepPoint
from harness.experiments import ExperimentFn, apply_sweep_value, get_experiment


def point_seed(seed: int, index: int) -> int:
    """Независимое зерно точки перебора"""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


class SweepRunner:
    """Запуск перебора из RunConfig"""

    def __init__(self, jobs: Optional[int] = None):
        self.jobs = jobs

    def points(self, run_config: RunConfig) -> List[SweepPoint]:
        """Точки перебора в порядке значений конфигурации"""
        return [
            apply_sweep_value(run_config, i, value, point_seed(run_config.seed, i))
            for i, value in enumerate(run_config.sweep.values)
        ]

    def _run_point(self, fn: ExperimentFn, point: SweepPoint, run_config: RunConfig, config_hash: str) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            'index': point.index,
            'experiment': run_config.experiment,
            'variable': run_config.sweep.variable,
            'value': point.value,
            'seed': point.seed,
            'config_hash': config_hash,
        }
        try:
            record['report'] = fn(point, run_config)
            record['status'] = 'ok'
        except Exception as e:
            log.error(f"Точка {point.index} ({run_config.sweep.variable}={point.value}): {type(e).__name__}: {e}")
            record['status'] = 'error'
            record['error'] = f"{type(e).__name__}: {e}"
        return record

    async def run(
        self,
        run_config: RunConfig,
        runner: Optional[ExperimentFn] = None,
        jobs: Optional[int] = None,
    ) -> List[Dict[str, Any]]:
        """
        Выполнить перебор

        Args:
            run_config: Конфигурация
            runner: Функция точки вместо эксперимента из реестра
            jobs: Ширина пула (по умолчанию из окружения или конфига)

        Returns:
            Записи, отсортированные по индексу точки
        """
        fn = runner or get_experiment(run_config.experiment)
        points = self.points(run_config)
        if not points:
            log.info("Пустой перебор: записей нет")
            return []

        width = max(1, int(jobs or self.jobs or run_config.resolve_jobs()))
        config_hash = run_config.config_hash()
        log.info(
            f"Перебор {run_config.experiment}: {run_config.sweep.variable} x {len(points)}, "
            f"воркеров {width}, hash={config_hash[:12]}"
        )

        loop = asyncio.get_running_loop()
        semaphore = asyncio.Semaphore(width)
        with ThreadPoolExecutor(max_workers=width) as pool:
            async def run_one(point: SweepPoint) -> Dict[str, Any]:
                async with semaphore:
                    return await loop.run_in_executor(pool, self._run_point, fn, point, run_config, config_hash)

            records = await asyncio.gather(*(run_one(p) for p in points))

        failed = sum(1 for r in records if r['status'] != 'ok')
        if failed:
            log.warning(f"Перебор завершен с ошибками: {failed} из {len(records)}")
        return sorted(records, key=lambda r: r['index'])

    def run_sync(self, run_config: RunConfig, runner: Optional[ExperimentFn] = None, jobs: Optional[int] = None) -> List[Dict[str, Any]]:
        return asyncio.run(self.run(run_config, runner=runner, jobs=jobs))


async def run_sweep(run_config: RunConfig, jobs: Optional[int] = None) -> List[Dict[str, Any]]:
    """Поток записей NDJSON по одной на точку перебора"""
    return await sweep_runner.run(run_config, jobs=jobs)


# Глобальный экземпляр
sweep_runner = SweepRunner()
