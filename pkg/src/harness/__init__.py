"""Стенд экспериментов: конфигурация, перебор, регрессия, порог, отчеты"""
from .models import RunConfig, GridSpec, SweepSpec, ExperimentOptions, SweepPoint, ThresholdResult, load_run_config
from .experiments import EXPERIMENTS, get_experiment
from .sweeps import sweep_runner, SweepRunner, run_sweep
from .scaling import fit_scaling
from .threshold import threshold_bisect, threshold_scan, bisect_amplitude
from .reports import emit_report, read_ndjson

__all__ = [
    'RunConfig', 'GridSpec', 'SweepSpec', 'ExperimentOptions', 'SweepPoint', 'ThresholdResult', 'load_run_config',
    'EXPERIMENTS', 'get_experiment',
    'sweep_runner', 'SweepRunner', 'run_sweep',
    'fit_scaling',
    'threshold_bisect', 'threshold_scan', 'bisect_amplitude',
    'emit_report', 'read_ndjson',
]
