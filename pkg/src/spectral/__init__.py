"""Спектральные модули: сетка, операторы мод, линейный и нелинейный анализ"""
from .models import (
    FlowParams, RadialGrid, ModeField, OperatorBundle, SpectralGapResult, ScalingFit,
    WeightParams, ForcingSpec, SpaceTimeLedger, EnergyLedger, ExperimentVerdict, SimState,
)
from .radial_grid import build_grid, l2_norm, h1r_norm, h1r_dual_norm, norms
from .mode_operators import assemble_Lnu, assemble_zero_mode, get_bundle, solve_stream
from .stability_analysis import (
    spectral_gap, check_accretivity, semigroup_bound_check, verify_elliptic_lemmas, verify_prop41,
)
from .linear_evolution import (
    step_linear, evolve, measure_decay_rate, verify_spacetime_vorticity, verify_spacetime_temperature,
)
from .nonlinear_sim import step_nonlinear, energy_ledger, run_stability_experiment

__all__ = [
    'FlowParams', 'RadialGrid', 'ModeField', 'OperatorBundle', 'SpectralGapResult', 'ScalingFit',
    'WeightParams', 'ForcingSpec', 'SpaceTimeLedger', 'EnergyLedger', 'ExperimentVerdict', 'SimState',
    'build_grid', 'l2_norm', 'h1r_norm', 'h1r_dual_norm', 'norms',
    'assemble_Lnu', 'assemble_zero_mode', 'get_bundle', 'solve_stream',
    'spectral_gap', 'check_accretivity', 'semigroup_bound_check', 'verify_elliptic_lemmas', 'verify_prop41',
    'step_linear', 'evolve', 'measure_decay_rate', 'verify_spacetime_vorticity', 'verify_spacetime_temperature',
    'step_nonlinear', 'energy_ledger', 'run_stability_experiment',
]
