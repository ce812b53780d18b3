import math

import numpy as np
import pytest

from restriction_lab.errors import DomainError, GridMismatchError
from restriction_lab.grids_norms import (
    ORIGIN,
    NormExponent,
    NormRole,
    RadialGrid,
    mixed_norm_p2,
    mixed_norm_p22,
    mixed_norm_p22_coefficients,
    radial_integral,
)
from restriction_lab.spherical import AngularQuadrature, ZGrid


@pytest.fixture
def grid():
    return RadialGrid(r_max=64, nodes_per_block=24)


def test_grid_layout(grid):
    assert [b.m for b in grid.blocks] == [ORIGIN, 0, 1, 2, 3, 4, 5]
    assert grid.blocks[-1].hi == 64
    assert grid.size == 7 * 24 - 24 + 16
    assert np.all(np.diff(grid.nodes) > 0)
    assert grid.weights.sum() == pytest.approx(64.0, rel=1e-13)
    assert set(np.unique(grid.block_labels)) == {ORIGIN, 0, 1, 2, 3, 4, 5}


def test_grid_validation():
    with pytest.raises(DomainError):
        RadialGrid(r_max=3)
    with pytest.raises(DomainError):
        RadialGrid(r_max=0.5)
    with pytest.raises(DomainError):
        RadialGrid(panel_width=0)
    with pytest.raises(DomainError):
        RadialGrid(r_max=8, m_min=3)
    with pytest.raises(DomainError):
        RadialGrid(r_max=8).block(7)


def test_panels_and_variants():
    grid = RadialGrid(r_max=16, nodes_per_block=4, origin_nodes=4, panel_width=1.0)
    # 1 + 1 + 2 + 4 + 8 unit panels of 4 nodes
    assert grid.size == 16 * 4
    assert grid.refined().size == 2 * grid.size
    assert grid.extended().r_max == 32

    trimmed = RadialGrid(r_max=16, m_min=2)
    assert [b.m for b in trimmed.blocks] == [2, 3]
    assert trimmed.nodes.min() > 4


def test_radial_integral_blocks(grid):
    result = radial_integral(np.exp(-grid.nodes), grid)
    assert result.value == pytest.approx(1 - math.exp(-64), rel=1e-12)
    assert result.contributions[ORIGIN] == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert result.contributions[2] == pytest.approx(math.exp(-4) - math.exp(-8), rel=1e-10)
    assert result.decays
    assert result.tail < 1e-20


def test_radial_integral_flags_growth(grid):
    result = radial_integral(grid.nodes, grid)
    assert not result.decays
    assert math.isinf(result.tail)
    with pytest.raises(GridMismatchError):
        radial_integral(np.ones(3), grid)


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0, 6.5])
def test_indicator_of_unit_disc(grid, p):
    coefficient = np.where(grid.nodes < 1, math.sqrt(2 * math.pi), 0.0)
    expected = math.sqrt(2 * math.pi) * 0.5 ** (1 / p)
    assert mixed_norm_p2(coefficient, grid, p).value == pytest.approx(expected, rel=1e-12)


def test_mixed_norm_p2_sums_harmonics(grid):
    indicator = np.where(grid.nodes < 1, 1.0, 0.0)
    two_channels = np.stack([3 * indicator, 4j * indicator])
    assert mixed_norm_p2(two_channels, grid, 2).value == pytest.approx(5 * math.sqrt(0.5), rel=1e-12)
    with pytest.raises(GridMismatchError):
        mixed_norm_p2(np.ones((2, 5)), grid, 2)
    with pytest.raises(DomainError):
        mixed_norm_p2(indicator, grid, 0.5)


def test_mixed_norm_p22_of_solid_cylinder():
    grid = RadialGrid(r_max=4)
    z_grid = ZGrid(0.0, 2.0, 16)
    quadrature = AngularQuadrature.circle(8)
    samples = np.where(grid.nodes < 1, 1.0, 0.0)[:, None, None] * np.ones((1, 16, 8))

    # unit disc times [0, 2] in zeta, angular mass 2 pi
    assert mixed_norm_p22(samples, grid, z_grid, quadrature, 2).value == pytest.approx(
        math.sqrt(2 * math.pi), rel=1e-12)
    p = 4.0
    expected = math.sqrt(4 * math.pi) * 0.5 ** (1 / p)
    assert mixed_norm_p22(samples, grid, z_grid, quadrature, p).value == pytest.approx(expected, rel=1e-12)

    with pytest.raises(GridMismatchError):
        mixed_norm_p22(samples[:, :8], grid, z_grid, quadrature, 2)


def test_norm_estimate_carries_finite_tail(grid):
    # r (1 + r)^-3 decays like r^-2: every block beyond r_max still contributes
    def beyond(a):
        return 1 / (1 + a) - 1 / (2 * (1 + a) ** 2)

    estimate = mixed_norm_p2((1 + grid.nodes) ** -1.5, grid, 2)
    assert estimate.value ** 2 == pytest.approx(0.5 - beyond(64), rel=1e-10)

    last, previous = beyond(32) - beyond(64), beyond(16) - beyond(32)
    gamma = last / previous
    assert estimate.decays
    assert estimate.tail == pytest.approx(last * gamma / (1 - gamma), rel=1e-8)
    assert 0 < estimate.tail < 0.02
    assert estimate.upper > estimate.value
    assert estimate.upper ** 2 == pytest.approx(0.5, rel=1e-2)
    assert float(estimate) == estimate.value
    assert estimate.row("lhs") == {"lhs": estimate.value, "lhs_tail": estimate.tail, "lhs_upper": estimate.upper}


def test_norm_estimate_flags_growth(grid, caplog):
    estimate = mixed_norm_p2(np.ones(grid.size), grid, 2)
    assert not estimate.decays
    assert math.isinf(estimate.upper)
    assert "does not decay" in caplog.text


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("s", [0.5, 2.0, 4.0])
def test_dilation_scaling(grid, n, s):
    p = 3.0
    base = mixed_norm_p2(np.exp(-grid.nodes ** 2), grid, p, n)
    dilated = mixed_norm_p2(np.exp(-(grid.nodes / s) ** 2), grid, p, n)
    assert dilated.value == pytest.approx(s ** (n / p) * base.value, rel=1e-10)


def test_homogeneity_and_monotonicity(grid):
    rng = np.random.default_rng(3)
    envelope = np.exp(-grid.nodes)
    f = (rng.standard_normal((3, grid.size)) + 1j * rng.standard_normal((3, grid.size))) * envelope
    norm = mixed_norm_p2(f, grid, 1.5).value

    assert mixed_norm_p2((2 - 3j) * f, grid, 1.5).value == pytest.approx(abs(2 - 3j) * norm, rel=1e-12)
    assert mixed_norm_p2(np.abs(f), grid, 1.5).value == pytest.approx(norm, rel=1e-12)

    smaller = f * rng.uniform(0, 1, size=f.shape)
    assert mixed_norm_p2(smaller, grid, 1.5).value <= norm
    assert mixed_norm_p2(f[:2], grid, 1.5).value <= norm


def test_nesting_under_refinement(grid):
    def norm(g):
        return mixed_norm_p2(g.nodes * np.exp(-g.nodes / 4), g, 2.5).value

    assert norm(grid.refined()) == pytest.approx(norm(grid), rel=1e-10)
    assert norm(grid.extended()) >= norm(grid)
    assert norm(grid.extended()) == pytest.approx(norm(grid), rel=1e-6)


def test_mixed_norm_p22_separable_product(grid):
    z_grid = ZGrid(0.0, 2.0, 256)
    quadrature = AngularQuadrature.circle(16)
    a = np.exp(-grid.nodes)
    b = np.cos(z_grid.values)
    c = 1 + np.cos(quadrature.points)
    samples = a[:, None, None] * b[None, :, None] * c[None, None, :]

    p = 3.0
    radial = (1 / p ** 2) ** (1 / p)
    expected = radial * math.sqrt(1 + math.sin(4) / 4) * math.sqrt(3 * math.pi)
    assert mixed_norm_p22(samples, grid, z_grid, quadrature, p).value == pytest.approx(expected, rel=1e-6)


def test_mixed_norm_p22_from_coefficients():
    grid = RadialGrid(r_max=4)
    coefficients = np.where(grid.nodes < 1, 1.0, 0.0)[None, :, None] * np.ones((1, 1, 10))
    result = mixed_norm_p22_coefficients(coefficients, grid, 0.2, 2)
    assert result.value == pytest.approx(0.5 * 10 * 0.2, rel=1e-12)
    assert set(result.contributions) == {ORIGIN, 0, 1}


def test_norm_exponents():
    q = NormExponent(4.5)
    assert q.role is NormRole.EXTENSION_Q
    assert q.threshold(2) == 4
    assert q.admissible(2)
    assert not NormExponent(4.0).admissible(2)
    assert NormExponent(3.5).admissible(3)

    p = q.dual()
    assert p.role is NormRole.RESTRICTION_P
    assert p.p == pytest.approx(4.5 / 3.5)
    assert p.threshold(2) == pytest.approx(4 / 3)
    assert p.admissible(2)

    assert NormExponent(1.2, "restriction_p").role is NormRole.RESTRICTION_P
    with pytest.raises(DomainError):
        NormExponent(1.0).dual()
    with pytest.raises(DomainError):
        NormExponent(math.inf)
