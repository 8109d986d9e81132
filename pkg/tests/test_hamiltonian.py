import numpy as np
import pytest
from numpy.testing import assert_allclose

from movingpoint import kernels
from movingpoint.errors import DegenerateCouplingError, PoleError, ResolventSetError, SizeGuardError
from movingpoint.grid import GridSpec, WaveField, lattice_delta, random_smooth_field
from movingpoint.hamiltonian import (
    DriftHamiltonian,
    PointInteractionOperator,
    apply_hv,
    default_lambda_star,
    dense_materialize,
    free_resolvent_apply,
    gamma_difference_defect,
    kato_rellich_sides,
    krein_resolvent_apply,
    renormalize_coupling,
)

V1 = np.array([0.6, 0.8, 0.0])


def _rand(grid, rng):
    return WaveField(rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape), grid)


def _rel(a, b):
    return (a - b).norm() / b.norm()


def test_symbol_real_and_bounded(grid32):
    for v in ([0, 0, 0], V1, [2.0, -1.0, 0.5]):
        H = DriftHamiltonian(grid32, v)
        assert H.symbol.dtype == float
        assert H.symbol.min() >= H.lower_bound


def test_constant_field_is_annihilated(grid8):
    H = DriftHamiltonian(grid8, V1)
    out = apply_hv(H, WaveField(np.full(grid8.shape, 2.0 - 1j), grid8))
    assert np.max(np.abs(out.values)) < 1e-13


def test_plane_wave_is_eigenvector(grid8):
    H = DriftHamiltonian(grid8, V1)
    k0 = 2 * np.pi / grid8.L * np.array([2, -1, 3])
    f = WaveField(np.exp(1j * grid8.x_dot(k0)), grid8)
    s = k0 @ k0 - V1 @ k0
    assert_allclose(apply_hv(H, f).values, s * f.values, atol=1e-12)


def test_lower_bound_on_random_fields(grid8, rng):
    v = np.array([1.5, -0.5, 1.0])
    H = DriftHamiltonian(grid8, v)
    for _ in range(100):
        f = _rand(grid8, rng)
        val = apply_hv(H, f).inner(f)
        assert abs(val.imag) <= 1e-10 * abs(val)
        assert val.real >= H.lower_bound * f.norm() ** 2 - 1e-10 * abs(val)


def test_kato_rellich_on_random_fields(grid8, rng):
    for _ in range(100):
        v = rng.normal(size=3)
        f = random_smooth_field(grid8, rng) if rng.uniform() < 0.5 else _rand(grid8, rng)
        lhs, rhs = kato_rellich_sides(v, f)
        assert lhs <= rhs * (1 + 1e-12)


def test_free_resolvent_inverts(grid8, rng):
    H = DriftHamiltonian(grid8, V1)
    f = _rand(grid8, rng)
    for lam in (3.0, 1 + 2j, -40j):
        u = free_resolvent_apply(H, lam, f)
        assert _rel(apply_hv(H, u) + lam * u, f) < 1e-12


def test_free_resolvent_identity_dense_and_spectral(grid8, rng):
    H = DriftHamiltonian(grid8, V1)
    f = _rand(grid8, rng)
    lam, mu = 2.0 + 0.5j, 0.7 - 1j
    lhs = free_resolvent_apply(H, lam, f) - free_resolvent_apply(H, mu, f)
    rhs = (mu - lam) * free_resolvent_apply(H, lam, free_resolvent_apply(H, mu, f))
    assert (lhs - rhs).norm() <= 1e-11 * f.norm()
    Rl, Rm = dense_materialize(H, lam), dense_materialize(H, mu)
    assert np.max(np.abs(Rl - Rm - (mu - lam) * Rl @ Rm)) < 1e-11


def test_resolvent_set_guard(grid8):
    H = DriftHamiltonian(grid8, [0, 0, 0])
    with pytest.raises(ResolventSetError):
        free_resolvent_apply(H, 0.0, WaveField.zeros(grid8))
    with pytest.raises(ResolventSetError):
        H.green_origin(-grid8.k2[1, 0, 0])


def _shell_profile(grid, field, lam, v, edges):
    r = grid.radius
    x = field.values * np.exp(-0.5j * grid.x_dot(v))
    a = kernels.shifted_root(lam, v)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (r >= lo) & (r < hi)
        exact = np.exp(-a * r[m]) / (4 * np.pi * r[m])
        out.append(abs(np.mean(x[m].real) - np.mean(exact.real)) / np.mean(exact.real))
    return np.array(out)


@pytest.mark.parametrize("v", [[0, 0, 0], V1, [0, 0, 1.0]])
@pytest.mark.parametrize("lam", [0.5, 1.0])
def test_lattice_green_far_field(grid64, lam, v):
    # pointwise values ring with the cube cutoff; shell averages carry the far field
    v = np.asarray(v, dtype=float)
    lam = lam + v @ v / 4
    Gd = free_resolvent_apply(DriftHamiltonian(grid64, v), lam, lattice_delta(grid64))
    assert_allclose(Gd.values, DriftHamiltonian(grid64, v).green_field(lam).values, atol=1e-14)
    err = _shell_profile(grid64, Gd, lam, v, np.arange(2.0, 5.01, 0.25))
    assert err.max() < 0.02


def test_lattice_green_origin_value(grid32):
    H = DriftHamiltonian(grid32, V1)
    assert_allclose(H.green_field(1.5).at_origin(), H.green_origin(1.5), rtol=1e-12)


def test_calibration_pins_gamma(grid32):
    for alpha, v in ((-1 / (4 * np.pi), V1), (-0.05, [0, 0, 0]), (0.2, [0, 0.5, 0])):
        P = PointInteractionOperator.calibrated(alpha, v, grid32)
        assert_allclose(P.gamma_d(P.lambda_star), kernels.gamma_v_alpha(alpha, v, P.lambda_star), atol=1e-13)
    P = PointInteractionOperator.calibrated(-1 / (4 * np.pi), [0, 0, 2.0], grid32)
    assert P.lambda_star == 2.0
    assert abs(P.gamma_d(2.0)) < 1e-13


def test_default_lambda_star():
    assert_allclose(default_lambda_star(-1 / (4 * np.pi), [2, 0, 0]), 2.0)
    assert_allclose(default_lambda_star(0.3, [2, 0, 0]), 2.0)
    assert default_lambda_star(kernels.DECOUPLED, [0, 0, 0]) == 1.0


def test_negative_coupling_by_lattice_sum():
    grid = GridSpec(32, 16.0)
    g = renormalize_coupling(-1 / (4 * np.pi), [0, 0, 0], grid)
    assert g < 0
    # Gamma vanishes at lam* = 1, so -1/g is the bare lattice sum
    lattice_sum = np.sum(1.0 / (grid.k2 + 1.0)) / grid.L**3
    assert_allclose(-1 / g, lattice_sum, rtol=1e-13)


def test_coupling_scales_like_inverse_h():
    vals = [-1 / renormalize_coupling(-1 / (4 * np.pi), [0, 0, 0], GridSpec(n, 16.0)) for n in (16, 32, 64)]
    # successive differences cancel the h-independent term of -1/g = A h^p + B
    p = -np.log2((vals[2] - vals[1]) / (vals[1] - vals[0]))
    assert abs(p + 1) < 0.15
    assert vals[0] < vals[1] < vals[2]


def test_coupling_edge_cases(grid8):
    assert renormalize_coupling(kernels.DECOUPLED, V1, grid8) == 0.0
    with pytest.raises(ValueError):
        renormalize_coupling(-0.1, [2, 0, 0], grid8, lambda_star=0.5)
    H = DriftHamiltonian(grid8, [0, 0, 0])
    alpha = -H.green_origin(1.0).real - 0.5 / (4 * np.pi) * 2
    with pytest.raises(DegenerateCouplingError):
        renormalize_coupling(alpha, [0, 0, 0], grid8, lambda_star=1.0)


def test_krein_decoupled_is_free(grid8, rng):
    P = PointInteractionOperator.calibrated(kernels.DECOUPLED, V1, grid8)
    f = _rand(grid8, rng)
    assert np.array_equal(krein_resolvent_apply(P, 2.0, f).values, free_resolvent_apply(P.base, 2.0, f).values)


@pytest.mark.parametrize("lam", [3.0, 1 + 2j, -2j / 0.05])
def test_krein_matches_dense(grid8, rng, lam):
    P = PointInteractionOperator.calibrated(-0.08, V1, grid8)
    R = dense_materialize(P, lam)
    for _ in range(5):
        f = _rand(grid8, rng)
        dense = WaveField((R @ f.values.ravel()).reshape(grid8.shape), grid8)
        assert _rel(krein_resolvent_apply(P, lam, f), dense) < 1e-10


def test_krein_inverts_perturbed_operator(grid8, rng):
    P = PointInteractionOperator.calibrated(-0.08, V1, grid8)
    f = _rand(grid8, rng)
    u = krein_resolvent_apply(P, 1 + 1j, f)
    assert _rel(P.apply(u) + (1 + 1j) * u, f) < 1e-12


def test_krein_adjoint_symmetry(grid8, rng):
    P = PointInteractionOperator.calibrated(-0.05, [0.3, -0.2, 0.9], grid8)
    lam = 0.8 + 1.7j
    for _ in range(10):
        f, g = _rand(grid8, rng), _rand(grid8, rng)
        lhs = krein_resolvent_apply(P, lam, f).inner(g)
        rhs = f.inner(krein_resolvent_apply(P, np.conj(lam), g))
        assert abs(lhs - rhs) <= 1e-11 * abs(lhs)


def test_krein_resolvent_identity(grid32, rng):
    P = PointInteractionOperator.calibrated(-1 / (4 * np.pi), V1, grid32)
    f = random_smooth_field(grid32, rng)
    lam, mu = 3.0, 1 + 2j
    lhs = krein_resolvent_apply(P, lam, f) - krein_resolvent_apply(P, mu, f)
    rhs = (mu - lam) * krein_resolvent_apply(P, lam, krein_resolvent_apply(P, mu, f))
    assert (lhs - rhs).norm() <= 1e-10 * lhs.norm()


def test_krein_pole_guard(grid8):
    P = PointInteractionOperator.calibrated(-1 / (4 * np.pi), [0, 0, 0], grid8)
    f = lattice_delta(grid8)
    with pytest.raises(PoleError):
        krein_resolvent_apply(P, P.lambda_star, f)
    assert np.all(np.isfinite(krein_resolvent_apply(P, P.lambda_star + 1e-6, f, allow_pole=True).values))


def test_dense_hermitian_and_guard(grid8):
    P = PointInteractionOperator.calibrated(-0.08, V1, grid8)
    M = dense_materialize(P)
    assert np.max(np.abs(M - M.conj().T)) < 1e-12 * np.max(np.abs(M))
    with pytest.raises(SizeGuardError):
        dense_materialize(PointInteractionOperator.calibrated(-0.08, V1, GridSpec(14, 10.0)))


def test_dense_decoupled_spectrum_is_symbol(grid8):
    P = PointInteractionOperator.calibrated(kernels.DECOUPLED, V1, grid8)
    ev = np.linalg.eigvalsh(dense_materialize(P))
    assert_allclose(ev, np.sort(P.base.symbol.ravel()), atol=1e-10)
    assert ev.min() >= -V1 @ V1 / 4


def test_dense_apply_matches_operator(grid8, rng):
    P = PointInteractionOperator.calibrated(-0.08, V1, grid8)
    f = _rand(grid8, rng)
    dense = (dense_materialize(P) @ f.values.ravel()).reshape(grid8.shape)
    assert_allclose(P.apply(f).values, dense, atol=1e-10 * np.max(np.abs(dense)))


def test_gamma_difference_converges():
    defects = [gamma_difference_defect(GridSpec(n, 20.0), V1, 1.0, 3.0) for n in (32, 64)]
    assert defects[1] < defects[0]
    grid = GridSpec(16, 20.0)
    H = DriftHamiltonian(grid, V1)
    P = PointInteractionOperator.calibrated(0.1, V1, grid)
    # telescoping holds exactly by definition
    assert_allclose(P.gamma_d(3.0) - P.gamma_d(1.0), H.green_origin(1.0) - H.green_origin(3.0), atol=1e-15)
