import math

import numpy as np
import pytest

from restriction_lab import radial_multiplier
from restriction_lab.errors import DomainError, GridMismatchError
from restriction_lab.grids_norms import RadialGrid
from restriction_lab.radial_multiplier import (
    MultiplierSpec,
    RadialField,
    apply_Tm,
    apply_Ts,
    builtin_multiplier,
    calibrate_c_grid,
    core_terms,
    dilation_identity,
    kernel_K,
    kernel_k_core,
    lommel_check,
    operator_norm_estimate,
    planar_multiplier_oracle,
    subordination_check,
)
from restriction_lab.spherical import HarmonicIndex


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def small_grid():
    return RadialGrid(r_max=8, panel_width=0.5)


def test_multiplier_specs():
    bump = builtin_multiplier("bump", 1.0, 2.0)
    assert bump.sup == pytest.approx(1.0)
    assert bump(np.array([0.5, 1.5, 2.5])) == pytest.approx([0.0, 1.0, 0.0])
    assert not bump.is_constant

    linear = MultiplierSpec.linear(1.0, 2.0)
    assert linear.total_variation == pytest.approx(1.0, rel=1e-12)
    assert linear.sup == pytest.approx(2.0)

    constant = MultiplierSpec.constant(1.0, 3.0, 2.5)
    assert constant.is_constant
    assert constant.total_variation == 0.0

    with pytest.raises(DomainError):
        MultiplierSpec.constant(0.0, 1.0)
    with pytest.raises(DomainError):
        builtin_multiplier("sinc", 1.0, 2.0)


def test_kernel_core_symmetry_and_diagonal():
    t = np.array([0.3, 1.7, 4.2])
    r = np.array([2.1, 0.9, 6.0])
    np.testing.assert_allclose(kernel_k_core(3, t, r, 1.4), kernel_k_core(3, r, t, 1.4), rtol=1e-12)

    on = kernel_k_core(2.5, 3.0, 3.0, 1.2)
    assert math.isfinite(on)
    # off-diagonal formula next to the diagonal limit at the midpoint
    close = kernel_k_core(2.5, 3.0 + 2e-4, 3.0, 1.2)
    assert close == pytest.approx(kernel_k_core(2.5, 3.0 + 1e-4, 3.0 + 1e-4, 1.2), abs=1e-7)

    with pytest.raises(DomainError):
        kernel_k_core(1, 1.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        kernel_k_core(1, -1.0, 2.0, 1.0)


def test_half_order_kernel_closed_form():
    # J_{1/2}(x) = sqrt(2 / (pi x)) sin x turns the Lommel integral into sines
    t = np.array([0.4, 1.7, 5.0, 12.5])
    r = np.array([2.2, 0.6, 5.3, 3.0])
    s = 1.3
    expected = (np.sin((t - r) * s) / (t - r) - np.sin((t + r) * s) / (t + r)) / math.pi
    np.testing.assert_allclose(kernel_k_core(0.5, t, r, s), expected, rtol=1e-10, atol=1e-13)

    diagonal = (s - math.sin(2 * 3.0 * s) / (2 * 3.0)) / math.pi
    assert kernel_k_core(0.5, 3.0, 3.0, s) == pytest.approx(diagonal, rel=1e-10)


def test_core_terms_sum_to_kernel():
    for alpha, t, r, s in [(0, 1.0, 2.5, 1.3), (4.5, 7.0, 3.2, 0.8), (12, 10.0, 11.0, 2.0)]:
        assert sum(core_terms(alpha, t, r, s)) == pytest.approx(kernel_k_core(alpha, t, r, s), rel=1e-9, abs=1e-12)
    with pytest.raises(DomainError):
        core_terms(1, 2.0, 2.0, 1.0)


def test_constant_multiplier_kernel_is_boundary_term(rng):
    spec = MultiplierSpec.constant(1.0, 2.0)
    evals = lommel_check(spec, rng, count=10)
    assert len(evals) == 10
    assert max(e.error for e in evals) <= 1e-8
    row = evals[0].row()
    assert set(row) == {"alpha", "t", "r", "kernel", "boundary", "error"}

    with pytest.raises(DomainError):
        lommel_check(MultiplierSpec.linear(), rng)


def test_kernel_K_is_symmetric():
    spec = MultiplierSpec.bump()
    assert kernel_K(1, 2.0, 5.0, spec) == pytest.approx(kernel_K(1, 5.0, 2.0, spec), rel=1e-12)


def test_radial_field_validation_and_dilation():
    with pytest.raises(DomainError):
        RadialField(2, (HarmonicIndex(0, 1),), (np.ones_like,), (2.0, 1.0))
    with pytest.raises(GridMismatchError):
        RadialField(2, (HarmonicIndex(0, 1),), (), (0.0, 1.0))

    field = RadialField(2, (HarmonicIndex(0, 1),), (lambda r: 1 + np.asarray(r),), (0.0, 2.0))
    np.testing.assert_allclose(field.evaluate([1.0, 3.0]), [[2.0, 0.0]])

    narrow = field.dilate(2.0)
    assert narrow.support == (0.0, 1.0)
    np.testing.assert_allclose(narrow.evaluate([0.5]), [[2.0]])
    np.testing.assert_allclose(field.scaled(3.0).evaluate([1.0]), [[6.0]])
    with pytest.raises(DomainError):
        field.dilate(0.0)


def test_kernel_and_split_methods_agree():
    grid = RadialGrid(r_max=4, nodes_per_block=8, origin_nodes=8)
    field = RadialField.gaussian()
    kernel = apply_Ts(field, 1.0, grid).values
    split = apply_Ts(field, 1.0, grid, method="split").values
    np.testing.assert_allclose(split, kernel, atol=1e-5 * np.max(np.abs(kernel)))

    with pytest.raises(DomainError):
        apply_Ts(field, 1.0, grid, method="fft")
    with pytest.raises(DomainError):
        apply_Ts(field, 0.0, grid)


def test_dilation_identity(rng):
    field = RadialField.random(rng, n=2, k_max=1)
    r = np.linspace(0.5, 6.0, 12)
    lhs, rhs = dilation_identity(field, 2.0, r)
    assert lhs.shape == rhs.shape == (3, 12)
    np.testing.assert_allclose(lhs, rhs, atol=1e-6 * np.max(np.abs(rhs)))


def test_decomposition_matches_direct_kernel(rng, small_grid):
    field = RadialField.random(rng, n=2, k_max=1)
    spec = MultiplierSpec.linear(1.0, 2.0)
    decomposed = apply_Tm(field, spec, small_grid)
    direct = apply_Tm(field, spec, small_grid, route="direct")
    assert decomposed.norm(2) == pytest.approx(direct.norm(2), rel=1e-6)
    np.testing.assert_allclose(decomposed.values, direct.values, atol=1e-6 * np.max(np.abs(direct.values)))

    with pytest.raises(DomainError):
        apply_Tm(field, spec, small_grid, route="fourier")


def test_planar_oracle_agrees_with_radial_route():
    field = RadialField.gaussian()
    spec = MultiplierSpec.bump(1.0, 2.0)
    grid = RadialGrid(r_max=64, panel_width=0.5)
    radial = apply_Tm(field, spec, grid, route="direct").norm(2)
    oracle = planar_multiplier_oracle(field, spec, 2.0, size=1024, side=200.0)
    assert oracle == pytest.approx(radial, rel=1e-3)
    # Plancherel with sup |m| = 1
    assert radial <= field.sample(grid).norm(2)


def test_planar_oracle_guards():
    spec = MultiplierSpec.bump()
    with pytest.raises(DomainError):
        planar_multiplier_oracle(RadialField.gaussian(n=3), spec, 2.0)
    with pytest.raises(DomainError):
        planar_multiplier_oracle(RadialField.gaussian(idx=HarmonicIndex(1, 1)), spec, 2.0)
    with pytest.raises(DomainError):
        planar_multiplier_oracle(RadialField.gaussian(), spec, 2.0, size=100)


def test_subordination_budget(rng):
    field = RadialField.random(rng, n=2, k_max=1)
    spec = MultiplierSpec.linear(1.0, 2.0)
    grid = RadialGrid(r_max=16, panel_width=0.5)
    report = subordination_check(field, spec, 1.5, grid)
    assert len(report.budget) == 2 + 16
    assert report.ok
    assert report.lhs <= report.budget_total * (1 + 1e-9)
    assert report.constant == 2 * report.c_grid
    assert {"s", "m", "abs_m_prime", "ts_norm", "contribution"} == set(report.budget[0].row())


def test_operator_norm_estimate(small_grid):
    assert operator_norm_estimate(lambda f: f.sample(small_grid), 2.0, small_grid,
                                  trials=3) == pytest.approx(1.0)
    halved = operator_norm_estimate(lambda f: f.sample(small_grid).combine(f.sample(small_grid), 0.25, 0.25),
                                    2.0, small_grid, trials=2)
    assert halved == pytest.approx(0.5)
    with pytest.raises(DomainError):
        operator_norm_estimate(lambda f: f.sample(small_grid), 2.0, small_grid, trials=0)


def test_subordination_keeps_given_c_grid(rng):
    field = RadialField.random(rng, n=2, k_max=1)
    spec = MultiplierSpec.linear(1.0, 2.0)
    grid = RadialGrid(r_max=16, panel_width=0.5)

    report = subordination_check(field, spec, 1.5, grid, c_grid=1.25)
    assert report.c_grid == 1.25
    assert report.constant == 2.5
    assert report.lhs_tail >= 0
    rows = list(report.budget_rows())
    assert len(rows) == len(report.budget)
    assert rows[0]["s"] == 1.0 and rows[1]["s"] == 2.0
    assert sum(row["contribution"] for row in rows) == pytest.approx(report.budget_total)

    # the budget still holds; the operator bound cannot with a deflated constant
    deflated = subordination_check(field, spec, 1.5, grid, c_grid=1e-3)
    assert deflated.lhs <= deflated.budget_total * (1 + 1e-9)
    assert not deflated.ok


def test_calibrated_c_grid_is_shared_across_fields(rng, small_grid):
    spec = MultiplierSpec.linear(1.0, 2.0)
    c_grid = calibrate_c_grid(spec, 1.5, small_grid, n=2, k_max=1)
    assert c_grid > 0
    assert calibrate_c_grid(spec, 1.5, small_grid, n=2, k_max=1) == c_grid

    first = subordination_check(RadialField.random(rng, n=2, k_max=1), spec, 1.5, small_grid)
    second = subordination_check(RadialField.random(rng, n=2, k_max=1), spec, 1.5, small_grid)
    assert first.c_grid == second.c_grid == c_grid


def test_inflated_multiplier_fails_subordination(rng, small_grid, monkeypatch):
    field = RadialField.random(rng, n=2, k_max=1)
    spec = MultiplierSpec.linear(1.0, 2.0)
    honest = subordination_check(field, spec, 1.5, small_grid, c_grid=1.0)
    assert honest.lhs <= honest.budget_total * (1 + 1e-9)

    apply = radial_multiplier.apply_Tm

    def inflated(*args, **kwargs):
        samples = apply(*args, **kwargs)
        return samples.combine(samples, 1e3, 0.0)

    monkeypatch.setattr(radial_multiplier, "apply_Tm", inflated)
    report = subordination_check(field, spec, 1.5, small_grid, c_grid=1.0)
    assert report.lhs == pytest.approx(1e3 * honest.lhs, rel=1e-12)
    assert report.budget_total == pytest.approx(honest.budget_total, rel=1e-12)
    assert not report.ok


def test_multiplier_never_mixes_harmonics(small_grid):
    def zero(r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def bump(r):
        r = np.asarray(r, dtype=float)
        return np.where(r < 3, np.sin(np.pi * r / 3) ** 2, 0.0)

    indices = (HarmonicIndex(0, 1), HarmonicIndex(1, 1), HarmonicIndex(1, 2))
    field = RadialField(2, indices, (zero, bump, zero), (0.0, 3.0))
    alone = RadialField(2, (HarmonicIndex(1, 1),), (bump,), (0.0, 3.0))
    spec = MultiplierSpec.bump(1.0, 2.0)

    values = apply_Tm(field, spec, small_grid, route="direct").values
    assert np.max(np.abs(values[1])) > 0
    assert np.all(values[0] == 0) and np.all(values[2] == 0)
    np.testing.assert_allclose(values[1], apply_Tm(alone, spec, small_grid, route="direct").values[0], rtol=1e-12)


@pytest.mark.parametrize("name", ["bump", "linear"])
def test_l2_bound_by_sup_over_seeded_fields(small_grid, name):
    spec = builtin_multiplier(name, 1.0, 2.0)
    for seed in range(4):
        field = RadialField.random(np.random.default_rng(seed), n=2, k_max=1)
        transformed = apply_Tm(field, spec, small_grid, route="direct").norm(2)
        assert transformed <= spec.sup * field.sample(small_grid).norm(2) * (1 + 1e-6)
