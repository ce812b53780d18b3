import math

import numpy as np
import pytest

from restriction_lab.errors import DomainError, GridMismatchError, InvalidHarmonicError, NumericalResolutionError
from restriction_lab.spherical import (
    AngularQuadrature,
    HarmonicIndex,
    SphericalCoefficientField,
    ZGrid,
    expand,
    harmonic_dimension,
    harmonic_indices,
    plancherel_l2_on_gamma,
    reconstruct,
    sph_harmonic_eval,
)
from restriction_lab.surface_extension import ProfileFunction


@pytest.fixture
def z_grid():
    return ZGrid(0.0, 1.0, 8)


def test_harmonic_dimensions():
    assert harmonic_dimension(2, 0) == 1
    assert harmonic_dimension(2, 5) == 2
    assert harmonic_dimension(3, 2) == 5
    assert len(harmonic_indices(2, 3)) == 7
    assert len(harmonic_indices(3, 3)) == 16
    assert HarmonicIndex(3, 1).order(2) == 3
    assert HarmonicIndex(3, 1).order(3) == 3.5


def test_invalid_harmonics():
    with pytest.raises(InvalidHarmonicError):
        harmonic_dimension(4, 0)
    with pytest.raises(InvalidHarmonicError):
        HarmonicIndex(1, 3).validate(2)
    with pytest.raises(InvalidHarmonicError):
        sph_harmonic_eval(3, HarmonicIndex(1, 4), [0.1, 0.2])


def test_known_values():
    assert sph_harmonic_eval(2, HarmonicIndex(0, 1), 1.3) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert sph_harmonic_eval(2, HarmonicIndex(1, 1), 0.0) == pytest.approx(1 / math.sqrt(math.pi))
    assert sph_harmonic_eval(2, HarmonicIndex(1, 2), math.pi / 2) == pytest.approx(1 / math.sqrt(math.pi))
    # zonal degree-one member at the north pole
    assert sph_harmonic_eval(3, HarmonicIndex(1, 2), [0.0, 0.0]) == pytest.approx(math.sqrt(3 / (4 * math.pi)))
    assert sph_harmonic_eval(3, HarmonicIndex(0, 1), [1.0, 2.0]) == pytest.approx(1 / math.sqrt(4 * math.pi))


@pytest.mark.parametrize("n,k_max", [(2, 5), (3, 3)])
def test_quadrature_orthonormality(n, k_max):
    quadrature = AngularQuadrature.for_degree(n, k_max)
    basis = quadrature.basis(harmonic_indices(n, k_max))
    gram = (basis * quadrature.weights) @ basis.T
    np.testing.assert_allclose(gram, np.eye(len(basis)), atol=1e-12)


def test_circle_round_trip(z_grid):
    quadrature = AngularQuadrature.for_degree(2, 4)
    z = z_grid.values[:, None]
    theta = quadrature.points[None, :]
    samples = z + np.cos(2 * theta) * (1 - z) + 0.5 * np.sin(3 * theta)

    field = expand(samples, 2, 4, z_grid, quadrature)
    np.testing.assert_allclose(reconstruct(field, quadrature.points), samples, atol=1e-9)
    np.testing.assert_allclose(field.entry(HarmonicIndex(3, 2)), 0.5 * math.sqrt(math.pi), atol=1e-12)
    np.testing.assert_allclose(field.entry(HarmonicIndex(1, 1)), 0.0, atol=1e-12)


def test_sphere_round_trip(z_grid):
    quadrature = AngularQuadrature.for_degree(3, 2)
    y10 = sph_harmonic_eval(3, HarmonicIndex(1, 2), quadrature.points)
    y2 = sph_harmonic_eval(3, HarmonicIndex(2, 1), quadrature.points)
    samples = z_grid.values[:, None] * y10[None, :] - 2.0 * y2[None, :]

    field = expand(samples, 3, 2, z_grid, quadrature)
    np.testing.assert_allclose(field.entry(HarmonicIndex(1, 2)), z_grid.values, atol=1e-12)
    np.testing.assert_allclose(field.entry(HarmonicIndex(2, 1)), -2.0, atol=1e-12)
    np.testing.assert_allclose(reconstruct(field, quadrature.points), samples, atol=1e-9)


def test_expand_rejects_coarse_or_mismatched_input(z_grid):
    coarse = AngularQuadrature.circle(4)
    with pytest.raises(NumericalResolutionError):
        expand(np.zeros((8, 4)), 2, 4, z_grid, coarse)
    with pytest.raises(GridMismatchError):
        expand(np.zeros((7, 16)), 2, 4, z_grid)
    with pytest.raises(GridMismatchError):
        expand(np.zeros((8, 16)), 3, 4, z_grid, AngularQuadrature.circle(16))


def test_z_grid_validation():
    with pytest.raises(DomainError):
        ZGrid(0.0, 1.0, 6)
    with pytest.raises(DomainError):
        ZGrid(1.0, 1.0, 8)
    assert ZGrid(0.0, 1.0, 8).step == pytest.approx(1 / 7)


def test_field_entries_and_truncation(z_grid):
    field = SphericalCoefficientField.from_entries(2, 2, z_grid, {HarmonicIndex(1, 2): 3.0})
    assert np.all(field.entry(HarmonicIndex(1, 2)) == 3.0)
    assert np.all(field.entry(HarmonicIndex(5, 1)) == 0.0)
    with pytest.raises(InvalidHarmonicError):
        SphericalCoefficientField.from_entries(2, 2, z_grid, {HarmonicIndex(3, 1): 1.0})
    with pytest.raises(ValueError):
        field.coefficients[0, 0] = 1.0
    rows = list(field.coefficient_rows())
    assert len(rows) == 5 * 8
    assert rows[0] == {"k": 0, "j": 1, "z_index": 0, "value": 0.0}


def test_plancherel_on_unit_cylinder():
    profile = ProfileFunction.cylinder(count=16)
    field = SphericalCoefficientField.from_entries(2, 0, profile.z_grid, {HarmonicIndex(0, 1): 1.0})
    assert plancherel_l2_on_gamma(field, profile) == pytest.approx(1.0, rel=1e-12)

    doubled = field.scaled(2.0)
    assert plancherel_l2_on_gamma(doubled, profile) == pytest.approx(4.0, rel=1e-12)


def test_plancherel_rejects_other_grid(z_grid):
    profile = ProfileFunction.cylinder(count=16)
    field = SphericalCoefficientField.zeros(2, 1, z_grid)
    with pytest.raises(GridMismatchError):
        plancherel_l2_on_gamma(field, profile)


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def random_coefficients(rng, n, k_max, z_grid):
    u = z_grid.values
    entries = {}
    for idx in harmonic_indices(n, k_max):
        a, b, c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        entries[idx] = a + b * np.cos(np.pi * u) + c * u ** 2
    return SphericalCoefficientField.from_entries(n, k_max, z_grid, entries)


def test_plancherel_matches_surface_integral(rng):
    profile = ProfileFunction.bump(count=64)
    field = random_coefficients(rng, 2, 3, profile.z_grid)
    quadrature = AngularQuadrature.circle(32)
    values = reconstruct(field, quadrature.points)

    # |X_z x X_theta| for X(z, theta) = (g cos theta, g sin theta, z)
    z, theta = np.meshgrid(profile.z_grid.values, quadrature.points, indexing="ij")
    g = 1 + z * (1 - z)
    g_prime = 1 - 2 * z
    x_z = np.stack([g_prime * np.cos(theta), g_prime * np.sin(theta), np.ones_like(z)], axis=-1)
    x_theta = np.stack([-g * np.sin(theta), g * np.cos(theta), np.zeros_like(z)], axis=-1)
    area = np.linalg.norm(np.cross(x_z, x_theta), axis=-1)

    direct = profile.z_grid.simpson((np.abs(values) ** 2 * area) @ quadrature.weights)
    assert plancherel_l2_on_gamma(field, profile) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("n,k_max", [(2, 4), (3, 2)])
def test_parseval_in_every_z_slice(rng, z_grid, n, k_max):
    field = random_coefficients(rng, n, k_max, z_grid)
    quadrature = AngularQuadrature.for_degree(n, k_max)
    values = reconstruct(field, quadrature.points)

    angular = np.abs(values) ** 2 @ quadrature.weights
    np.testing.assert_allclose(angular, np.sum(np.abs(field.coefficients) ** 2, axis=0), rtol=1e-12)


def test_expand_is_linear(rng, z_grid):
    quadrature = AngularQuadrature.for_degree(2, 3)
    first = rng.standard_normal((z_grid.count, quadrature.size))
    second = rng.standard_normal((z_grid.count, quadrature.size))
    alpha, beta = 2.0 - 1.5j, -0.25

    combined = expand(alpha * first + beta * second, 2, 3, z_grid, quadrature)
    expected = (alpha * expand(first, 2, 3, z_grid, quadrature).coefficients
                + beta * expand(second, 2, 3, z_grid, quadrature).coefficients)
    np.testing.assert_allclose(combined.coefficients, expected, atol=1e-12)
