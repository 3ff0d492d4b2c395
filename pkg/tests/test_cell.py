import numpy as np
import pytest

from blochstrip.cell import (CellGrid, GridGeometry, build_coefficient_field,
                             fourier_coefficients, free_space_field, sample_on_grid)
from blochstrip.errors import ValidationError

from conftest import rng


def test_constant_field_extrema():
    f = build_coefficient_field({"type": "constant", "value": 1.0})
    assert f.a_min == f.a_max == 1.0


def test_rod_extrema(rod_field):
    assert rod_field.a_min == pytest.approx(1 / 12)
    assert rod_field.a_max == 1.0


def test_grid_extrema():
    f = build_coefficient_field({"type": "grid", "values": 2.0 * np.ones((4, 4))})
    assert f.a_min == f.a_max == 2.0


def test_nonpositive_coefficient_rejected():
    with pytest.raises(ValidationError):
        build_coefficient_field({"type": "constant", "value": 0.0})
    with pytest.raises(ValidationError):
        build_coefficient_field({"type": "grid", "values": [[1.0, -1.0], [1.0, 1.0]]})


def test_rod_touching_boundary_rejected():
    with pytest.raises(ValidationError):
        build_coefficient_field({"type": "rod", "center": [0.5, 0.5], "radius": 0.5,
                                 "a_inside": 1.0, "a_outside": 2.0})


def test_periodic_evaluation(rod_field):
    x = np.array([0.12, 0.4, 0.77])
    y = np.array([0.3, 0.9, 0.05])
    eps = rod_field.epsilon
    np.testing.assert_array_equal(rod_field(x, y), rod_field(x + eps, y))
    np.testing.assert_array_equal(rod_field(x, y), rod_field(x, y + eps))


def test_fourier_constant_one():
    a_hat = fourier_coefficients(free_space_field(), cutoff=2)
    assert a_hat[(0, 0)] == pytest.approx(1.0)
    assert all(abs(v) < 1e-14 for k, v in a_hat.items() if k != (0, 0))


def test_fourier_constant_two():
    f = build_coefficient_field({"type": "constant", "value": 2.0})
    a_hat = fourier_coefficients(f, cutoff=2)
    assert a_hat[(0, 0)] == pytest.approx(2.0)
    assert all(abs(v) < 1e-14 for k, v in a_hat.items() if k != (0, 0))


def test_fourier_rod_mean_against_quadrature(rod_field):
    # independent oracle: composite trapezoid on the periodic cell at n=1024
    # (node samples; periodicity makes the end corrections cancel)
    n = 1024
    c = np.arange(n) / n
    x, y = np.meshgrid(c, c, indexing="ij")
    oracle = float(np.mean(rod_field(x, y)))
    a_hat = fourier_coefficients(rod_field, cutoff=6)
    assert a_hat[(0, 0)].real == pytest.approx(oracle, rel=1e-8)
    assert abs(a_hat[(0, 0)].imag) < 1e-12


def test_fourier_conjugate_symmetry():
    g = rng(3)
    vals = 0.5 + g.random((8, 8))
    f = build_coefficient_field({"type": "grid", "values": vals})
    a_hat = fourier_coefficients(f, cutoff=2)
    for (g1, g2), v in a_hat.items():
        assert a_hat[(-g1, -g2)] == pytest.approx(np.conj(v), abs=1e-13)


def test_parseval_monotone_in_cutoff(rod_field):
    n = 256
    grid = CellGrid(n=n, epsilon=rod_field.epsilon)
    samples = sample_on_grid(rod_field, grid)
    mean_sq = float(np.mean(samples**2))
    previous = 0.0
    for cutoff in (1, 2, 4, 8):
        a_hat = fourier_coefficients(rod_field, cutoff)
        total = sum(abs(v) ** 2 for v in a_hat.values())
        assert total <= mean_sq * (1 + 1e-12)
        assert total >= previous - 1e-12
        previous = total


def test_sample_on_grid_constant():
    f = free_space_field()
    out = sample_on_grid(f, CellGrid(n=4))
    np.testing.assert_array_equal(out, np.ones((4, 4)))
    f2 = build_coefficient_field({"type": "constant", "value": 2.0})
    np.testing.assert_array_equal(sample_on_grid(f2, CellGrid(n=2)), 2.0 * np.ones((2, 2)))


def test_sample_on_grid_rod_mean(rod_field):
    out = sample_on_grid(rod_field, CellGrid(n=256, epsilon=rod_field.epsilon))
    assert out.min() >= rod_field.a_min
    assert out.max() <= rod_field.a_max
    a0 = fourier_coefficients(rod_field, cutoff=4)[(0, 0)].real
    assert float(np.mean(out)) == pytest.approx(a0, rel=1e-6)


def test_cell_grid_must_be_power_of_two():
    with pytest.raises(ValidationError):
        CellGrid(n=12)


def test_grid_geometry_roundtrip_interpolation():
    # evaluation at the original cell centers returns the stored samples
    g = rng(5)
    vals = 1.0 + g.random((16, 16))
    f = build_coefficient_field({"type": "grid", "values": vals})
    out = sample_on_grid(f, CellGrid(n=16, epsilon=1.0))
    np.testing.assert_allclose(out, vals, atol=1e-13)
