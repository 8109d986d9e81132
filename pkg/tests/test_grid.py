import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from movingpoint.errors import GridMismatchError
from movingpoint.grid import (
    GridSpec,
    WaveField,
    boundary_fraction,
    fft,
    gaussian_state,
    ifft,
    lattice_delta,
    phase_v,
    random_smooth_field,
    read_field,
    spectral_forward,
    spectral_inverse,
    translate,
    write_field,
    write_slice_png,
)


def _random_field(grid, rng):
    return WaveField(rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape), grid)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(7, 10.0)
    with pytest.raises(ValueError):
        GridSpec(2, 10.0)
    with pytest.raises(ValueError):
        GridSpec(8, -1.0)
    g = GridSpec(6, 3.0)
    assert g.h == 0.5
    assert g.axis[0] == 0.0
    assert g.axis.min() == -1.5


def test_coordinates_and_wavenumbers(grid8):
    assert_allclose(grid8.axis, [0, 1.25, 2.5, 3.75, -5, -3.75, -2.5, -1.25])
    assert_allclose(grid8.wavenumbers[1], 2 * np.pi / 10)
    assert grid8.radius[0, 0, 0] == 0
    assert grid8.points().shape == (8, 8, 8, 3)


def test_parseval(grid8, rng):
    f = _random_field(grid8, rng)
    F = spectral_forward(f)
    assert_allclose(F.inner(F), f.inner(f), rtol=1e-13)
    g = _random_field(grid8, rng)
    assert_allclose(F.inner(spectral_forward(g)), f.inner(g), rtol=1e-13)


def test_transform_round_trip(grid8, rng):
    f = _random_field(grid8, rng)
    back = spectral_inverse(spectral_forward(f))
    assert np.max(np.abs(back.values - f.values)) <= 1e-14 * np.max(np.abs(f.values)) * 10
    assert_allclose(ifft(fft(f.values)), f.values, atol=1e-13)


def test_plane_wave_single_coefficient(grid8):
    m = (1, -2, 3)
    k = [2 * np.pi * mi / grid8.L for mi in m]
    f = WaveField(np.exp(1j * grid8.x_dot(k)), grid8)
    c = np.abs(fft(f.values))
    idx = tuple(mi % grid8.n for mi in m)
    assert_allclose(c[idx], grid8.n**1.5)
    c[idx] = 0
    assert c.max() < 1e-11


def test_inner_product_weighting(grid8):
    one = WaveField(np.ones(grid8.shape), grid8)
    assert_allclose(one.norm() ** 2, grid8.L**3)
    d = lattice_delta(grid8)
    f = WaveField(np.arange(512).reshape(grid8.shape) + 2.0j, grid8)
    assert_allclose(d.inner(f), f.at_origin())


def test_immutable_and_grid_checks(grid8):
    f = WaveField.zeros(grid8)
    with pytest.raises(AttributeError):
        f.values = None
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1
    with pytest.raises(GridMismatchError):
        f + WaveField.zeros(GridSpec(8, 11.0))
    with pytest.raises(GridMismatchError):
        WaveField(np.zeros((4, 4, 4)), grid8)


def test_translate_by_grid_step_is_roll(grid8, rng):
    f = _random_field(grid8, rng)
    g = translate(f, [grid8.h, 0, 0])
    assert_allclose(g.values, np.roll(f.values, -1, axis=0), atol=1e-12)
    g = translate(f, [0, -2 * grid8.h, grid8.h])
    assert_allclose(g.values, np.roll(f.values, (2, -1), axis=(1, 2)), atol=1e-12)


def test_translate_is_unitary(grid8, rng):
    f = _random_field(grid8, rng)
    assert_allclose(translate(f, [0.37, -1.1, 2.3]).norm(), f.norm(), rtol=1e-13)


vec = st.lists(st.floats(-3, 3), min_size=3, max_size=3)


@given(vec, vec)
def test_translate_composition(a, b):
    grid = GridSpec(8, 10.0)
    f = random_smooth_field(grid, np.random.default_rng(3))
    lhs = translate(translate(f, a), b)
    rhs = translate(f, np.add(a, b))
    assert_allclose(lhs.values, rhs.values, atol=1e-11)


def test_translate_gaussian_moves_center(grid32):
    f = gaussian_state(grid32, center=(1.0, 0, 0), width=1.0)
    g = translate(f, [0.5, 0, 0])
    i = np.unravel_index(np.argmax(np.abs(g.values)), grid32.shape)
    assert_allclose(grid32.axis[i[0]], 0.5, atol=grid32.h / 2)


def test_phase_v(grid8):
    v = np.array([0.4, -0.2, 1.0])
    f = WaveField(np.ones(grid8.shape), grid8)
    g = phase_v(f, v)
    assert_allclose(g.values, np.exp(0.5j * grid8.x_dot(v)))
    assert_allclose(np.abs(g.values), 1.0)
    assert phase_v(f, [0, 0, 0]) is f


def test_gaussian_state_properties(grid32):
    f = gaussian_state(grid32, width=1.0)
    assert_allclose(f.norm(), 1.0, rtol=1e-14)
    assert np.max(np.abs(f.values.imag)) == 0
    p = np.array([2 * np.pi * 3 / grid32.L, 0, 0])
    g = gaussian_state(grid32, width=1.0, momentum=p)
    i = np.unravel_index(np.argmax(np.abs(fft(g.values))), grid32.shape)
    assert i == (3, 0, 0)


def test_gaussian_state_warns_on_seam(grid8):
    with pytest.warns(UserWarning, match="seam"):
        gaussian_state(grid8, width=2.0)


def test_gaussian_second_moment(grid64):
    w = 0.9
    f = gaussian_state(grid64, width=w)
    x = grid64.coords[0]
    assert_allclose(np.sum(x**2 * np.abs(f.values) ** 2) * grid64.cell_volume, w * w, rtol=1e-10)


def test_boundary_fraction(grid8):
    assert boundary_fraction(WaveField.zeros(grid8)) == 0.0
    assert boundary_fraction(WaveField(np.ones(grid8.shape), grid8)) == 1.0


def test_snapshot_round_trip(tmp_path, grid8, rng):
    f = _random_field(grid8, rng)
    path = tmp_path / "f.bin"
    write_field(path, f)
    g = read_field(path)
    assert g.grid == grid8
    assert np.array_equal(g.values, f.values)
    raw = path.read_bytes()
    assert raw[:8] == b"MPFIELD1"
    assert len(raw) == 24 + 16 * 512


def test_snapshot_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"NOTAFILE" + bytes(16))
    with pytest.raises(ValueError):
        read_field(p)


def test_slice_png(tmp_path, grid8):
    p = tmp_path / "s.png"
    write_slice_png(p, gaussian_state(grid8, width=0.8, tail_tol=1.0))
    assert p.read_bytes()[:4] == b"\x89PNG"
