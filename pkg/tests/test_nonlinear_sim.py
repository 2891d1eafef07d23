"""Тесты усеченной нелинейной системы"""
import csv
import math

import numpy as np
import pytest

from utils import PreconditionError, ShapeMismatchError, ParameterDomainError
from spectral.models import FlowParams, WeightParams
from spectral.radial_grid import build_grid, l2_norm, random_dirichlet_field, padded_samples, to_physical_evaluation, forward_transform
from spectral.mode_operators import get_bundle
from spectral.linear_evolution import step_linear
from spectral.nonlinear_sim import (
    ENERGY_CSV_COLUMNS, transport_modes, stream_functions, vorticity_nonlinear, temperature_nonlinear,
    buoyancy_modes, buoyancy_rhs, zero_mode_rhs, initial_state, zero_state, step_nonlinear,
    stable_dt, nonlinear_dt, conjugate_drift, EnergyAccumulator, energy_ledger, threshold_rhs,
    bootstrap_check, scaling_constraint_ok, smallness_conditions, sine_bump_family,
    save_checkpoint, load_checkpoint, run_stability_experiment, nonzero_energy, fit_nonzero_decay,
)


@pytest.fixture
def small():
    """K = 2 на сетке n = 24"""
    params = FlowParams(nu=1.0e-2, A=1.0, B=1.0, R=2.0, K=2)
    return params, build_grid(2.0, 24)


def _random_modes(grid, K, rng, scale=1.0):
    return np.array([scale * random_dirichlet_field(grid, rng) for _ in range(2 * K + 1)])


def _real_modes(grid, K, rng, scale=1.0):
    """Сопряженно-симметричный набор мод (вещественное физическое поле)"""
    modes = np.zeros((2 * K + 1, grid.n), dtype=complex)
    modes[K] = scale * random_dirichlet_field(grid, rng, complex_valued=False).real
    for k in range(1, K + 1):
        v = scale * random_dirichlet_field(grid, rng)
        modes[K + k] = v
        modes[K - k] = np.conj(v)
    return modes


def _tilde(modes, grid):
    K = (modes.shape[0] - 1) // 2
    out = modes / np.sqrt(grid.nodes)[None, :]
    out[K] = modes[K]
    return out


def _synth(rows, m, multiplier=None):
    K = (rows.shape[0] - 1) // 2
    return to_physical_evaluation(
        {k: rows[k + K] * (1 if multiplier is None else multiplier(k)) for k in range(-K, K + 1)}, m,
    )


def test_transport_matches_physical_space(rng):
    K = 4
    grid = build_grid(2.0, 32)
    r = grid.nodes
    field = _random_modes(grid, K, rng)
    phi = _random_modes(grid, K, rng)
    m = padded_samples(K)
    P, F = _tilde(phi, grid), _tilde(field, grid)
    dr_P = _synth(P @ grid.deriv.T, m)
    dr_F = _synth(F @ grid.deriv.T, m)
    dt_P = _synth(P, m, lambda k: 1j * k)
    dt_F = _synth(F, m, lambda k: 1j * k)
    S = forward_transform(dr_P * dt_F - dt_P * dr_F, K)
    expected = np.array([S[k] / (r if k == 0 else np.sqrt(r)) for k in range(-K, K + 1)])
    result = transport_modes(field, phi, grid)
    assert np.max(np.abs(result - expected)) < 1e-9 * max(1.0, np.max(np.abs(expected)))


def test_buoyancy_matches_physical_space(rng):
    K = 4
    params = FlowParams(A=0.7, B=1.0, R=2.0, g_scale=1.3, K=K)
    grid = build_grid(2.0, 32)
    r = grid.nodes
    t = 0.9
    rho = _random_modes(grid, K, rng)
    m = padded_samples(K)
    phase = np.exp(-1j * np.arange(-K, K + 1) * params.A * t)[:, None]
    hat = _tilde(rho, grid) * phase
    theta = 2 * np.pi * np.arange(m) / m
    field = np.cos(theta)[None, :] * _synth(hat @ grid.deriv.T, m) \
        - np.sin(theta)[None, :] / r[:, None] * _synth(hat, m, lambda k: 1j * k)
    B_hat = forward_transform(field, K)
    expected = np.array([
        params.g_scale * B_hat[k] * (1.0 if k == 0 else np.sqrt(r) * np.exp(1j * k * params.A * t))
        for k in range(-K, K + 1)
    ])
    result = buoyancy_modes(rho, t, params, grid)
    assert np.max(np.abs(result - expected)) < 1e-10 * max(1.0, np.max(np.abs(expected)))


def test_buoyancy_of_zero_mode_only(small):
    params, grid = small
    K = params.K
    rho = np.zeros((2 * K + 1, grid.n), dtype=complex)
    rho[K] = np.sin(np.pi * (grid.nodes - 1.0))
    out = buoyancy_rhs(rho, 1, 0.0, params, grid)
    expected = np.sqrt(grid.nodes) * (grid.deriv @ rho[K]) / 2
    assert np.max(np.abs(out.values - expected)) < 1e-12
    assert out.rep == 'weighted'
    assert np.all(buoyancy_rhs(np.zeros_like(rho), 1, 0.3, params, grid).values == 0)


def test_buoyancy_rejects_mode_outside_truncation(small):
    params, grid = small
    with pytest.raises(PreconditionError):
        buoyancy_rhs(np.zeros((5, grid.n)), 3, 0.0, params, grid)


def test_self_interaction_support(small, rng):
    params, grid = small
    K = params.K
    omega = np.zeros((2 * K + 1, grid.n), dtype=complex)
    omega[K + 1] = random_dirichlet_field(grid, rng)
    phi = stream_functions(omega, params, grid)
    out = transport_modes(omega, phi, grid)
    for k in range(-K, K + 1):
        if k != 2:
            assert np.all(np.abs(out[k + K]) < 1e-14), k


def test_nonlinear_terms_bilinear(small, rng):
    params, grid = small
    omega = _random_modes(grid, params.K, rng)
    phi = stream_functions(omega, params, grid)
    for k in (-1, 0, 2):
        one = vorticity_nonlinear(omega, phi, k, grid).values
        two = vorticity_nonlinear(2 * omega, 2 * phi, k, grid).values
        assert np.max(np.abs(two - 4 * one)) < 1e-12 * max(1.0, np.max(np.abs(one)))


def test_temperature_nonlinear_zero_inputs(small, rng):
    params, grid = small
    rho = _random_modes(grid, params.K, rng)
    phi = _random_modes(grid, params.K, rng)
    zero = np.zeros_like(rho)
    assert np.all(temperature_nonlinear(zero, phi, 1, grid).values == 0)
    assert np.all(temperature_nonlinear(rho, zero, 1, grid).values == 0)
    assert temperature_nonlinear(rho, phi, 0, grid).rep == 'hat'


def test_nonlinear_term_checks(small):
    params, grid = small
    modes = np.zeros((5, grid.n))
    with pytest.raises(PreconditionError):
        vorticity_nonlinear(modes, modes, 3, grid)
    with pytest.raises(ShapeMismatchError):
        vorticity_nonlinear(np.zeros((5, grid.n + 1)), modes, 1, grid)


def test_zero_mode_rhs_vanishes_without_modes(small):
    params, grid = small
    om, rh = zero_mode_rhs(zero_state(params, grid.n), params)
    assert np.all(om == 0) and np.all(rh == 0)


def test_zero_mode_rhs_real_buoyancy(small, rng):
    params, grid = small
    K = params.K
    r = grid.nodes
    rho = np.zeros((2 * K + 1, grid.n), dtype=complex)
    v = random_dirichlet_field(grid, rng)
    rho[K + 1], rho[K - 1] = v, np.conj(v)
    state = initial_state(np.zeros_like(rho), rho, params, grid)
    om, rh = zero_mode_rhs(state, params)
    tilde = v / np.sqrt(r)
    expected = np.real(grid.deriv @ tilde + tilde / r)
    assert np.max(np.abs(om.imag)) < 1e-11
    assert np.max(np.abs(om.real - expected)) < 1e-11
    assert np.all(rh == 0)


def test_zero_mode_rhs_real_at_any_time(small, rng):
    params, grid = small
    K = params.K
    state = initial_state(_real_modes(grid, K, rng), _real_modes(grid, K, rng), params, grid, t=2.3)
    om, rh = zero_mode_rhs(state, params)
    assert np.max(np.abs(om.imag)) < 1e-11 * max(1.0, np.max(np.abs(om)))
    assert np.max(np.abs(rh.imag)) < 1e-11 * max(1.0, np.max(np.abs(rh)))


def test_zero_state_is_fixed_point(small):
    params, grid = small
    state = zero_state(params, grid.n)
    for _ in range(5):
        state = step_nonlinear(state, 0.1, params)
    assert np.all(state.omega == 0) and np.all(state.rho == 0) and np.all(state.phi == 0)
    assert abs(state.t - 0.5) < 1e-12


def test_step_rejects_nonpositive_dt(small):
    params, grid = small
    with pytest.raises(ParameterDomainError):
        step_nonlinear(zero_state(params, grid.n), 0.0, params)


def test_reality_preserved(small, rng):
    params, grid = small
    state = initial_state(_real_modes(grid, params.K, rng, 1e-2), _real_modes(grid, params.K, rng, 1e-2), params, grid)
    assert conjugate_drift(state) == 0.0
    for _ in range(10):
        state = step_nonlinear(state, 0.05, params)
    assert conjugate_drift(state) < 1e-11 * state.t


def test_uncoupled_modes_follow_linear_evolution(small, rng):
    params, grid = small
    params = params.with_updates(g_scale=0.0)
    K = params.K
    omega = _random_modes(grid, K, rng)
    state = initial_state(omega, np.zeros_like(omega), params, grid)
    bundle = get_bundle(params, 1, grid.n)
    single = state.mode(1)
    for j in range(10):
        state = step_nonlinear(state, 0.1, params, include_nonlinear=False)
        single = step_linear(single, bundle, None, 0.1 * j, 0.1)
    assert np.max(np.abs(state.omega[K + 1] - single.values)) < 1e-12


def test_nonlinear_correction_is_quadratic(small, rng):
    params, grid = small
    K = params.K
    omega0 = _real_modes(grid, K, rng)
    rho0 = _real_modes(grid, K, rng)
    diffs = []
    amplitudes = [1e-6, 1e-5, 1e-4]
    for a in amplitudes:
        full = initial_state(a * omega0, a * rho0, params, grid)
        lin = full
        for _ in range(10):
            full = step_nonlinear(full, 0.1, params)
            lin = step_nonlinear(lin, 0.1, params, include_nonlinear=False)
        diffs.append(float(np.max(np.abs(full.omega - lin.omega)) + np.max(np.abs(full.rho - lin.rho))))
    slope = np.polyfit(np.log(amplitudes), np.log(diffs), 1)[0]
    assert abs(slope - 2.0) < 0.1


def test_nonlinear_second_order_in_time():
    params = FlowParams(nu=1.0e-2, A=1.0, B=1.0, R=2.0, K=2)
    grid = build_grid(2.0, 16)
    K = params.K
    bump = np.sin(np.pi * (grid.nodes - 1.0)).astype(complex)
    omega = np.zeros((2 * K + 1, grid.n), dtype=complex)
    omega[K + 1], omega[K - 1] = 0.1 * bump, 0.1 * bump
    omega[K + 2], omega[K - 2] = 0.05j * bump, -0.05j * bump
    rho = 0.5 * omega
    finals = []
    for dt in (0.2, 0.1, 0.05):
        state = initial_state(omega, rho, params, grid)
        for _ in range(int(round(1.0 / dt))):
            state = step_nonlinear(state, dt, params)
        finals.append(state.omega)
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    assert math.log2(e1 / e2) >= 1.9


def test_zero_mode_diffusion_monotone(small, rng):
    params, grid = small
    params = params.with_updates(g_scale=0.0)
    K = params.K
    rho = np.zeros((2 * K + 1, grid.n), dtype=complex)
    rho[K] = random_dirichlet_field(grid, rng, complex_valued=False).real
    state = initial_state(np.zeros_like(rho), rho, params, grid)
    previous = l2_norm(state.zero_weighted('rho'), grid)
    for _ in range(20):
        state = step_nonlinear(state, 0.2, params)
        current = l2_norm(state.zero_weighted('rho'), grid)
        assert current <= previous * (1 + 1e-12)
        previous = current
    assert np.all(state.rho[K + 1] == 0)


def test_time_step_limits(small, rng):
    params, grid = small
    assert stable_dt(zero_state(params, grid.n), params) == math.inf
    state = initial_state(_real_modes(grid, params.K, rng), _real_modes(grid, params.K, rng), params, grid)
    dt = nonlinear_dt(state, params)
    assert 0 < dt <= stable_dt(state, params)
    assert dt <= 0.1


def test_energy_ledger_of_zero_solution(small):
    params, grid = small
    state = zero_state(params, grid.n)
    history = [state]
    for _ in range(4):
        state = step_nonlinear(state, 0.1, params)
        history.append(state)
    led = energy_ledger(history, params)
    assert all(v == 0 for v in led.E.values()) and all(v == 0 for v in led.H.values())
    assert not led.inconclusive
    assert led.E_sum == 0.0


def test_energy_ledger_zero_mode_is_sup_norm(small, rng):
    params, grid = small
    K = params.K
    states = [
        initial_state(_real_modes(grid, K, rng, s), _real_modes(grid, K, rng, s), params, grid, t=0.1 * j)
        for j, s in enumerate([1.0, 3.0, 2.0])
    ]
    led = energy_ledger(states, params)
    assert led.E[0] == pytest.approx(max(l2_norm(s.omega[K], grid) for s in states), rel=1e-12)
    assert led.H[0] == pytest.approx(max(l2_norm(s.rho[K], grid) for s in states), rel=1e-12)
    assert all(v >= 0 for v in led.E.values())


def test_energy_ledger_single_snapshot(small, rng):
    params, grid = small
    K = params.K
    state = initial_state(_real_modes(grid, K, rng), _real_modes(grid, K, rng), params, grid)
    one = energy_ledger([state], params, single_dt=1.0)
    four = energy_ledger([state], params, single_dt=4.0)
    assert one.E_parts[1]['sup'] == pytest.approx(l2_norm(state.omega[K + 1], grid), rel=1e-12)
    assert four.E_parts[1]['l2'] == pytest.approx(2.0 * one.E_parts[1]['l2'], rel=1e-12)
    assert four.H_parts[-1]['dissipation'] == pytest.approx(2.0 * one.H_parts[-1]['dissipation'], rel=1e-12)


def test_energy_ledger_dense_history_is_conclusive(small, rng):
    params, grid = small
    K = params.K
    state = initial_state(_real_modes(grid, K, rng, 1e-3), _real_modes(grid, K, rng, 1e-3), params, grid)
    history = [state]
    for _ in range(40):
        state = step_nonlinear(state, 0.05, params)
        history.append(state)
    led = energy_ledger(history, params, weight=WeightParams(c_prime=0.1))
    assert not led.inconclusive
    assert set(led.E_parts[1]) == {'sup', 'l2', 'inviscid', 'dissipation'}
    assert set(led.H_parts[1]) == {'sup', 'l2', 'dissipation'}


def test_energy_ledger_empty_history(small):
    params, _ = small
    with pytest.raises(PreconditionError):
        energy_ledger([], params)


def test_energy_accumulator_counts(small):
    params, grid = small
    acc = EnergyAccumulator(params, params.K)
    state = zero_state(params, grid.n)
    acc.add(state)
    acc.add(step_nonlinear(state, 0.1, params))
    assert acc.count == 2 and acc.first is state


def test_threshold_rhs_values():
    params = FlowParams(nu=1.0e-2, B=1.0, R=2.0)
    rhs = threshold_rhs(params, 1.0, 1.0)
    assert rhs['E'] == pytest.approx(0.025)
    assert rhs['H'] == pytest.approx(1.0e-2 ** (7 / 6) / 8.0)


def test_scaling_constraint():
    assert scaling_constraint_ok(FlowParams(nu=1.0e-2, B=1.0, R=2.0))
    assert not scaling_constraint_ok(FlowParams(nu=1.0, B=1.0e-3, R=100.0))


def test_sine_bump_saturates_conditions(small):
    params, grid = small
    omega, rho = sine_bump_family(params, grid, 0.01, 0.01)
    cond = smallness_conditions(initial_state(omega, rho, params, grid), params, 0.01, 0.01)
    assert cond['cond1_lhs'] == pytest.approx(cond['cond1_rhs'], rel=1e-10)
    assert cond['cond2_lhs'] == pytest.approx(cond['cond2_rhs'], rel=1e-10)
    assert cond['cond1_ok'] and cond['cond2_ok']
    assert cond['cond1_variant_lhs'] > 0


def test_bootstrap_requires_rotation(small):
    params, grid = small
    led = energy_ledger([zero_state(params, grid.n)], params)
    with pytest.raises(PreconditionError):
        bootstrap_check(led, params.with_updates(B=0.0), 0.0)
    report = bootstrap_check(led, params, 0.0)
    assert report['max_E_ratio'] == 0.0 and report['E_sum_ratio'] == 0.0


@pytest.mark.parametrize('fmt, name', [('npz', 'state.npz'), ('ndjson', 'state.ndjson')])
def test_checkpoint_round_trip(tmp_path, small, rng, fmt, name):
    params, grid = small
    state = initial_state(_real_modes(grid, params.K, rng), _real_modes(grid, params.K, rng), params, grid, t=1.5)
    path = save_checkpoint(state, str(tmp_path / name), fmt)
    loaded = load_checkpoint(str(path), params)
    assert loaded.t == 1.5
    assert np.array_equal(loaded.omega, state.omega)
    assert np.array_equal(loaded.rho, state.rho)
    assert np.allclose(loaded.phi, state.phi, atol=1e-15)


def test_checkpoint_rejects_other_truncation(tmp_path, small):
    params, grid = small
    path = save_checkpoint(zero_state(params, grid.n), str(tmp_path / 'state.npz'))
    with pytest.raises(PreconditionError):
        load_checkpoint(str(path), params.with_updates(K=3))
    with pytest.raises(ParameterDomainError):
        save_checkpoint(zero_state(params, grid.n), str(tmp_path / 'state.bin'), 'bin')


def test_zero_amplitude_is_stable(small):
    params, _ = small
    verdict, ledger = run_stability_experiment(params, amplitude=0.0, horizon=1.0, n=24)
    assert verdict.outcome == 'stable'
    assert verdict.sup_energy_ratio == 0.0
    assert ledger.E_sum == 0.0 and ledger.H_sum == 0.0
    assert abs(verdict.horizon_reached - 1.0) < 1e-9
    assert verdict.nonzero_decay_rate is None
    assert verdict.decay_rate_ok is None


def test_small_data_is_stable():
    params = FlowParams(nu=1.0e-2, A=1.0, B=1.0, R=2.0, K=4)
    verdict, ledger = run_stability_experiment(params, amplitude=1.0, horizon=50.0, n=24)
    assert verdict.outcome == 'stable'
    assert verdict.hypothesis_held
    assert not verdict.blowup
    assert verdict.sup_energy_ratio <= 4.0
    assert verdict.conditions['bootstrap'] is not None
    assert verdict.conditions['conjugate_drift'] < 1e-11 * 50.0
    assert verdict.decay_rate_ok
    assert verdict.nonzero_decay_rate >= verdict.required_decay_rate > 0


def test_hypothesis_fails_above_threshold(small):
    params, _ = small
    verdict, _ = run_stability_experiment(params, amplitude=2.0, horizon=0.5, n=24)
    assert not verdict.hypothesis_held
    assert not verdict.conditions['cond1_ok']


def test_experiment_writes_csv_and_checkpoint(tmp_path, small):
    params, _ = small
    csv_path = tmp_path / 'energy.csv'
    ckpt = tmp_path / 'final.npz'
    verdict, _ = run_stability_experiment(
        params, horizon=1.0, n=24, dt=0.1, energy_csv=str(csv_path), csv_every=5, checkpoint_path=str(ckpt),
    )
    with open(csv_path, newline='', encoding='utf-8') as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ENERGY_CSV_COLUMNS
    # t = 0, 0.5, 1.0 и финальная запись, по 2K+1 строк
    assert len(rows) - 1 == 4 * (2 * params.K + 1)
    assert load_checkpoint(str(ckpt), params).t == pytest.approx(verdict.horizon_reached)


def test_experiment_rejects_bad_arguments(small):
    params, _ = small
    with pytest.raises(ParameterDomainError):
        run_stability_experiment(params, amplitude=-1.0)
    with pytest.raises(ParameterDomainError):
        run_stability_experiment(params, init_family='unknown')


# --- затухание ненулевых мод ---

def test_nonzero_energy_skips_zero_mode(small):
    params, grid = small
    K = params.K
    omega = np.zeros((2 * K + 1, grid.n), dtype=complex)
    bump = np.sin(np.pi * (grid.nodes - 1.0))
    omega[K] = 5.0 * bump
    omega[K + 1] = bump
    state = initial_state(omega, np.zeros_like(omega), params, grid)
    assert nonzero_energy(state) == pytest.approx(l2_norm(bump, grid) ** 2, rel=1e-12)


def test_fit_nonzero_decay_exact_exponential():
    t = 0.125 * np.arange(201)
    fit = fit_nonzero_decay(t, np.exp(-2.0 * 0.3 * t), 25.0)
    assert fit['rate'] == pytest.approx(0.3, abs=1e-10)
    assert fit['window'] == [12.5, 25.0]


def test_fit_nonzero_decay_needs_positive_tail():
    t = np.linspace(0.0, 1.0, 11)
    assert fit_nonzero_decay(t, np.zeros_like(t), 1.0) is None
    assert fit_nonzero_decay(t[:3], np.ones(3), 1.0) is None


def test_slow_decay_blocks_stable_verdict(small):
    """Вес с c′ много больше щели требует недостижимой скорости затухания"""
    params, _ = small
    verdict, _ = run_stability_experiment(
        params, amplitude=1.0, horizon=20.0, n=24, dt=0.02,
        weight=WeightParams(c_prime=40.0), stability_factor=math.inf,
    )
    assert verdict.required_decay_rate > 1.0
    assert verdict.decay_rate_ok is False
    assert verdict.nonzero_decay_rate < verdict.required_decay_rate
    assert verdict.outcome == 'growth'


def test_truncation_does_not_change_small_data_run():
    base = FlowParams(nu=1.0e-2, A=1.0, B=1.0, R=2.0, K=8)
    weight = WeightParams(c_prime=0.5)
    coarse, coarse_ledger = run_stability_experiment(base, horizon=5.0, n=24, dt=0.1, weight=weight)
    fine, fine_ledger = run_stability_experiment(base.with_updates(K=16), horizon=5.0, n=24, dt=0.1, weight=weight)

    assert fine.outcome == coarse.outcome
    assert fine.sup_energy_ratio == pytest.approx(coarse.sup_energy_ratio, rel=1e-8)
    assert fine_ledger.E[1] == pytest.approx(coarse_ledger.E[1], rel=1e-8)
    assert fine.nonzero_decay_rate == pytest.approx(coarse.nonzero_decay_rate, rel=1e-6)


def test_small_data_stable_to_default_horizon():
    """K = 8, n = 48, горизонт 10/скорость усиленной диссипации"""
    params = FlowParams(nu=1.0e-2, A=1.0, B=1.0, R=2.0, K=8)
    verdict, _ = run_stability_experiment(params, amplitude=1.0, n=48)
    assert verdict.horizon_reached == pytest.approx(10.0 / params.enhanced_rate(1), rel=1e-9)
    assert verdict.outcome == 'stable'
    assert verdict.sup_energy_ratio <= 4.0
    assert verdict.decay_rate_ok
    assert not verdict.blowup
