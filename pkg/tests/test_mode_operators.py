"""Тесты операторов одной моды"""
import numpy as np
import pytest

from utils import PreconditionError, ParameterDomainError, ShapeMismatchError
from spectral.models import FlowParams, ModeField
from spectral.radial_grid import build_grid, inner_product, l2_norm, random_dirichlet_field
from spectral.mode_operators import (
    assemble_Lnu, assemble_zero_mode, get_bundle, solve_elliptic, solve_stream,
    apply_laplacian, mode_transform,
)


def test_self_adjoint_case_is_positive():
    params = FlowParams(nu=1.0e-2, B=0.0, R=2.0)
    bundle = assemble_Lnu(params, 1, build_grid(2.0, 32))
    matrix = bundle.weighted()
    assert np.allclose(matrix, matrix.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(matrix)[0] > 0


@pytest.mark.parametrize('k', [1, 2, 5])
def test_accretivity_identity(k, rng):
    params = FlowParams(nu=1.0e-2, B=1.0, R=2.0)
    grid = build_grid(2.0, 64)
    bundle = assemble_Lnu(params, k, grid)
    r = grid.nodes
    for _ in range(50):
        f = random_dirichlet_field(grid, rng)
        form = inner_product(bundle.apply(f), f, grid)
        expected = params.nu * (l2_norm(grid.deriv @ f, grid) ** 2 + (k * k - 0.25) * l2_norm(f / r, grid) ** 2)
        scale = l2_norm(grid.deriv @ f, grid) ** 2 + l2_norm(f / r, grid) ** 2
        assert abs(form.real - expected) < 1e-10 * scale
        assert abs(form.imag - k * params.B * l2_norm(f / r, grid) ** 2) < 1e-10 * scale


def test_elliptic_operator_negative_definite(grid, params):
    for k in (0, 1, 3):
        bundle = get_bundle(params, k, grid.n)
        assert np.allclose(bundle.elliptic, bundle.elliptic.T, atol=1e-12)
        assert np.linalg.eigvalsh(bundle.elliptic)[-1] < 0


def test_assemble_rejects_zero_mode(grid, params):
    with pytest.raises(PreconditionError):
        assemble_Lnu(params, 0, grid)


def test_assemble_rejects_foreign_grid(params):
    with pytest.raises(ParameterDomainError):
        assemble_Lnu(params, 1, build_grid(3.0, 16))
    with pytest.raises(ParameterDomainError):
        assemble_zero_mode(params, build_grid(3.0, 16))


def test_get_bundle_is_cached(params):
    assert get_bundle(params, 2, 32) is get_bundle(params, 2, 32)
    assert get_bundle(params, 0, 32).k == 0


def test_zero_mode_laplacian_of_log_is_zero():
    params = FlowParams(R=2.0)
    grid = build_grid(2.0, 48)
    bundle = assemble_zero_mode(params, grid)
    result = apply_laplacian(np.log(grid.nodes).astype(complex), bundle)
    assert np.max(np.abs(result[grid.interior])) < 1e-8


def test_zero_mode_laplacian_of_square():
    params = FlowParams(R=2.0)
    grid = build_grid(2.0, 48)
    bundle = assemble_zero_mode(params, grid)
    result = apply_laplacian(grid.nodes ** 2, bundle)
    assert np.max(np.abs(result[grid.interior] - 4.0)) < 1e-9
    assert np.all(apply_laplacian(np.zeros(grid.n), bundle) == 0)


def test_zero_mode_diffusion_is_dissipative(grid, params, rng):
    bundle = get_bundle(params, 0, grid.n)
    assert np.linalg.eigvalsh(bundle.weighted().real)[0] > 0


def test_solve_stream_zero(grid, params):
    bundle = get_bundle(params, 2, grid.n)
    omega = ModeField(k=2, values=np.zeros(grid.n), grid=grid)
    assert np.all(solve_stream(omega, bundle).values == 0)


def test_solve_stream_manufactured_solution():
    params = FlowParams(R=2.0)
    grid = build_grid(2.0, 48)
    k = 2
    bundle = assemble_Lnu(params, k, grid)
    r = grid.nodes
    phi_star = (r - 1.0) * (2.0 - r)
    omega_star = -2.0 - (k * k - 0.25) * phi_star / r ** 2
    omega_star[0] = omega_star[-1] = 0.0
    phi = solve_stream(ModeField(k=k, values=omega_star, grid=grid), bundle)
    assert np.max(np.abs(phi.values - phi_star)) < 1e-9
    assert phi.values[0] == 0 and phi.values[-1] == 0


def test_mode_laplacian_on_quadratic(grid, params):
    """Δ_k на (r−1)(2−r) дает −2 − (k²−¼)φ/r² во внутренних узлах"""
    k = 2
    bundle = assemble_Lnu(params, k, grid)
    I = grid.interior
    r = grid.nodes[I]
    phi = (r - 1.0) * (2.0 - r)
    expected = -2.0 - (k * k - 0.25) * phi / r ** 2
    assert np.max(np.abs(bundle.Delta_k @ phi - expected)) < 1e-7


def test_solve_stream_weak_residual(grid, params, dirichlet_field):
    for k in (0, 1, 4):
        bundle = get_bundle(params, k, grid.n)
        omega = dirichlet_field()
        phi = solve_elliptic(omega, bundle)
        I = grid.interior
        residual = bundle.elliptic @ phi[I] - bundle.mass * omega[I]
        assert np.linalg.norm(residual) < 1e-10 * np.linalg.norm(bundle.mass * omega[I])


def test_solve_stream_linear(grid, params, dirichlet_field):
    bundle = get_bundle(params, 3, grid.n)
    w1, w2 = dirichlet_field(), dirichlet_field()
    a, b = 2.0 - 1.0j, 0.5
    combined = solve_elliptic(a * w1 + b * w2, bundle)
    separate = a * solve_elliptic(w1, bundle) + b * solve_elliptic(w2, bundle)
    assert np.max(np.abs(combined - separate)) < 1e-11


def test_solve_stream_checks_representation(grid, params):
    bundle = get_bundle(params, 1, grid.n)
    with pytest.raises(PreconditionError):
        solve_stream(ModeField(k=1, values=np.zeros(grid.n), rep='hat', grid=grid), bundle)
    with pytest.raises(PreconditionError):
        solve_stream(ModeField(k=2, values=np.zeros(grid.n), grid=grid), bundle)
    zero = get_bundle(params, 0, grid.n)
    with pytest.raises(PreconditionError):
        solve_stream(ModeField(k=0, values=np.zeros(grid.n), rep='weighted', grid=grid), zero)


def test_solve_elliptic_shape_mismatch(grid, params):
    with pytest.raises(ShapeMismatchError):
        solve_elliptic(np.zeros(grid.n + 2), get_bundle(params, 1, grid.n))


def test_mode_transform_at_zero_time(grid, dirichlet_field):
    f = ModeField(k=3, values=dirichlet_field(), rep='hat', grid=grid)
    w = mode_transform(f, 0.0, 'hat_to_weighted', A=7.0)
    assert w.rep == 'weighted'
    assert np.allclose(w.values, np.sqrt(grid.nodes) * f.values, atol=1e-15)


def test_mode_transform_round_trip(grid, dirichlet_field):
    f = ModeField(k=-2, values=dirichlet_field(), rep='hat', grid=grid)
    back = mode_transform(mode_transform(f, 1.7, 'hat_to_weighted', A=0.3), 1.7, 'weighted_to_hat', A=0.3)
    assert np.max(np.abs(back.values - f.values)) < 1e-14


def test_mode_transform_modulus_independent_of_phase(grid, dirichlet_field):
    f = ModeField(k=4, values=dirichlet_field(), rep='hat', grid=grid)
    a = mode_transform(f, 0.0, 'hat_to_weighted', A=1.0)
    b = mode_transform(f, 12.5, 'hat_to_weighted', A=-3.0)
    assert np.allclose(np.abs(a.values), np.abs(b.values), atol=1e-14)


def test_mode_transform_rejects_wrong_tag(grid):
    f = ModeField(k=1, values=np.zeros(grid.n), rep='weighted', grid=grid)
    with pytest.raises(PreconditionError):
        mode_transform(f, 0.0, 'hat_to_weighted', A=1.0)


def _pole_solution_error(n, k=2, c=0.9):
    """Ошибка решателя функции тока на φ* = (r−1)(2−r)/(r−c) с полюсом вне [1, 2]"""
    params = FlowParams(R=2.0)
    grid = build_grid(2.0, n)
    bundle = assemble_Lnu(params, k, grid)
    r = grid.nodes
    p, dp, d2p = -(r - 1.0) * (r - 2.0), 3.0 - 2.0 * r, -2.0
    g, dg, d2g = 1.0 / (r - c), -1.0 / (r - c) ** 2, 2.0 / (r - c) ** 3
    phi_star = p * g
    omega_star = d2p * g + 2.0 * dp * dg + p * d2g - (k * k - 0.25) * phi_star / r ** 2
    omega_star[0] = omega_star[-1] = 0.0
    phi = solve_stream(ModeField(k=k, values=omega_star, grid=grid), bundle)
    return float(np.max(np.abs(phi.values - phi_star)))


def test_solve_stream_converges_spectrally():
    coarse, fine = _pole_solution_error(24), _pole_solution_error(48)
    assert fine < 1e-3 * coarse
    assert fine < 1e-5
