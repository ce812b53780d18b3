import math

import numpy as np
import pytest

from restriction_lab.errors import DomainError, NumericalResolutionError, ZeroDenominatorError
from restriction_lab.grids_norms import RadialGrid
from restriction_lab.spherical import (
    AngularQuadrature,
    HarmonicIndex,
    SphericalCoefficientField,
    ZGrid,
    expand,
    reconstruct,
)
from restriction_lab.surface_extension import (
    REGIMES,
    BesselWeightedFamily,
    ProfileFunction,
    RegimeName,
    brute_force_extension,
    builtin_profile,
    claim_sweep,
    duality_pairing,
    dyadic_claim_check,
    extend,
    extension_energy,
    extension_quotient,
    low_frequency_split,
    predicted_block_exponent,
    regime_split,
    restriction_lemma_ratio,
    surface_measure_factors,
    turning_windows,
)


@pytest.fixture
def bump():
    return ProfileFunction.bump(count=64)


@pytest.fixture
def planar_field(bump):
    z = bump.z_grid.values
    return SphericalCoefficientField.from_entries(2, 1, bump.z_grid, {
        HarmonicIndex(0, 1): 1 + z,
        HarmonicIndex(1, 1): z ** 2,
    })


def test_profiles():
    cone = builtin_profile("cone", 32)
    assert cone.sup_A == pytest.approx(2.0)
    assert cone.sup_B == pytest.approx(1.0)
    assert not cone.is_constant
    assert ProfileFunction.cylinder(16).is_constant
    assert ProfileFunction.bump(65).at(0.5) == pytest.approx(1.25)

    with pytest.raises(DomainError):
        builtin_profile("torus")
    with pytest.raises(DomainError):
        ProfileFunction.from_samples(ZGrid(0, 1, 8), -np.ones(8))
    with pytest.raises(DomainError):
        ProfileFunction.truncated_sphere(interval=(-1.0, 0.5))
    with pytest.raises(DomainError):
        cone.at(3.0)


def test_measure_factors():
    cylinder = surface_measure_factors(ProfileFunction.cylinder(16, radius=2.0), 3)
    np.testing.assert_allclose(cylinder.G1, 4.0)
    np.testing.assert_allclose(cylinder.G2, 2.0 ** 1.5)
    assert cylinder.sphere_area == pytest.approx(4 * math.pi)

    cone = surface_measure_factors(ProfileFunction.cone(16), 2)
    np.testing.assert_allclose(cone.G1, cone.profile.g * math.sqrt(2))


def test_extension_matches_direct_quadrature(bump, planar_field):
    rho = np.array([0.5, 3.0])
    zeta = np.array([-1.0, 0.0, 2.5])
    samples = extend(planar_field, bump, rho, zeta, phases=True)
    values = samples.evaluate(0.7)

    def f(z, theta):
        return (1 + z) / math.sqrt(2 * math.pi) + z ** 2 * np.cos(theta) / math.sqrt(math.pi)

    for i, r in enumerate(rho):
        for j, s in enumerate(zeta):
            direct = brute_force_extension(f, bump, r, 0.7, s)
            assert abs(values[i, j] - direct) <= 1e-10 * max(1.0, abs(direct))


def test_extension_guards(bump, planar_field):
    unphased = extend(planar_field, bump, np.array([1.0]), np.array([0.0]))
    with pytest.raises(DomainError):
        unphased.evaluate(0.0)
    with pytest.raises(NumericalResolutionError):
        extend(planar_field, bump, np.array([1.0]), np.array([1e4]))


@pytest.mark.parametrize("n", [2, 3])
def test_energy_is_discrete_parseval(n):
    profile = ProfileFunction.bump(count=32)
    z = profile.z_grid.values
    field = SphericalCoefficientField.from_entries(n, 2, profile.z_grid, {
        HarmonicIndex(0, 1): np.cos(3 * z),
        HarmonicIndex(2, 1): z,
    })
    surface = surface_measure_factors(profile, n)
    rho = np.array([0.25, 1.0, 7.5])

    samples = extend(field, surface, rho)
    direct = np.sum(np.abs(samples.coefficients) ** 2, axis=(0, 2)) * samples.zeta.step
    np.testing.assert_allclose(extension_energy(field, surface, rho), direct, rtol=1e-10)


def test_extension_quotient(bump, planar_field):
    grid = RadialGrid(r_max=64, panel_width=1.0)
    quotient = extension_quotient(planar_field, bump, 6.0, grid)
    assert quotient.value > 0
    assert quotient.value == pytest.approx(quotient.numerator / quotient.denominator)

    scaled = extension_quotient(planar_field.scaled(3.0), bump, 6.0, grid)
    assert scaled.value == pytest.approx(quotient.value, rel=1e-12)

    with pytest.raises(DomainError):
        extension_quotient(planar_field, bump, 2.0, grid)
    with pytest.raises(ZeroDenominatorError):
        extension_quotient(SphericalCoefficientField.zeros(2, 1, bump.z_grid), bump, 6.0, grid)


def test_duality_pairing_on_cylinder():
    profile = ProfileFunction.cylinder(count=64)
    z = profile.z_grid.values
    field = SphericalCoefficientField.from_entries(2, 1, profile.z_grid, {
        HarmonicIndex(0, 1): np.exp(-z) + 0.5j * z,
        HarmonicIndex(1, 2): 1.0,
    })
    pairing = duality_pairing(field, profile, sigma=0.2, center=0.5)
    assert pairing.error <= 1e-6
    with pytest.raises(DomainError):
        duality_pairing(field, profile, sigma=0.0)


def test_family_construction():
    z_grid = ZGrid(0.0, 1.0, 16)
    family = BesselWeightedFamily.spread(2, 6, z_grid)
    assert list(family.orders) == [2, 3, 4, 5]
    assert family.mass().sum() == pytest.approx(1.0, rel=1e-12)
    assert family.rhs(5.0) == pytest.approx(1.0, rel=1e-12)

    with pytest.raises(DomainError):
        BesselWeightedFamily(np.array([0.2]), np.ones((1, 16)), z_grid, n=3)
    with pytest.raises(DomainError):
        BesselWeightedFamily.spread(5, 5, z_grid)


def test_block_exponent_above_and_below_threshold():
    profile = ProfileFunction.cylinder(count=16)
    family = BesselWeightedFamily.single(1.0, profile.z_grid)
    grid = RadialGrid(r_max=512, panel_width=0.5)

    assert predicted_block_exponent(5, 2) == -0.5
    report = restriction_lemma_ratio(family, profile, 5.0, grid, fit_blocks=range(3, 9))
    assert report.fitted_exponent == pytest.approx(-0.5, abs=0.3)
    assert not report.divergent
    assert math.isfinite(report.ratio_with_tail)
    assert [row["m"] for row in report.block_rows()] == list(range(9))

    below = restriction_lemma_ratio(family, profile, 3.5, grid, fit_blocks=range(3, 9))
    assert below.divergent
    assert below.predicted_exponent == pytest.approx(0.25)


def test_low_frequency_split_bounds(bump):
    family = BesselWeightedFamily.spread(0, 4, bump.z_grid)
    split = low_frequency_split(family, bump, 5.0)
    assert split.I <= split.bound_I
    assert split.II <= split.bound_II
    assert split.bound_I == pytest.approx(bump.sup_A ** 0.5 * split.rhs)


def test_turning_windows_cover_to_twice_m():
    edges = turning_windows(64, 1.0)
    assert edges[0] == 32
    assert np.diff(edges) == pytest.approx(np.full(len(edges) - 1, 4.0))
    assert edges[-1] >= 128
    with pytest.raises(DomainError):
        turning_windows(64, 0.0)


def test_regime_split_counts():
    profile = ProfileFunction.cylinder(count=16)
    family = BesselWeightedFamily.spread(16, 512, profile.z_grid)
    partition = regime_split(family, profile, 64, 0.5)
    assert partition.counts() == {RegimeName.LOW: 16, RegimeName.CENTRAL: 224, RegimeName.HIGH: 256}
    assert sum(partition.shares().values()) == pytest.approx(1.0)
    assert partition.window_counts.sum() == 96
    assert partition.block_integrals is None


def test_claim_calibration_and_guards():
    profile = ProfileFunction.cylinder(count=16)

    def family(m_block):
        return BesselWeightedFamily.spread(m_block / 2, 4 * m_block, profile.z_grid)

    sweep = claim_sweep(family, profile, 6.0, [8, 16, 32], band=2.0)
    assert sweep.calibration.ok
    assert sweep.calibration.bound == pytest.approx(2 * sweep.calibration.block_integral)
    assert len(sweep.blocks) == 2
    rows = list(sweep.rows())
    assert [row["m"] for row in rows] == [3, 4, 5]
    assert set(f"share_{name}" for name in REGIMES) <= set(rows[0])

    with pytest.raises(DomainError):
        dyadic_claim_check(family(8), profile, 4.0, 8)
    with pytest.raises(DomainError):
        dyadic_claim_check(family(8), profile, 5.0, 12)
    with pytest.raises(DomainError):
        claim_sweep(family, profile, 5.0, [8])


def test_brute_force_at_random_points(bump):
    z = bump.z_grid.values
    field = SphericalCoefficientField.from_entries(2, 2, bump.z_grid, {
        HarmonicIndex(0, 1): np.cos(2 * z),
        HarmonicIndex(1, 1): np.exp(-z),
        HarmonicIndex(2, 2): z * (1 - z) + 0.5j,
    })

    def f(z, theta):
        return (np.cos(2 * z) / math.sqrt(2 * math.pi) + np.exp(-z) * np.cos(theta) / math.sqrt(math.pi)
                + (z * (1 - z) + 0.5j) * np.sin(2 * theta) / math.sqrt(math.pi))

    rng = np.random.default_rng(4)
    for x, y, zeta in rng.uniform(-4, 4, size=(6, 3)):
        rho, phi = math.hypot(x, y), math.atan2(y, x)
        value = extend(field, bump, np.array([rho]), np.array([zeta]), phases=True).evaluate(phi)[0, 0]
        direct = brute_force_extension(f, bump, rho, phi, zeta)
        assert abs(value - direct) <= 1e-10 * max(1.0, abs(direct))


def test_extension_commutes_with_rotation(bump, planar_field):
    quadrature = AngularQuadrature.for_degree(2, 1)
    shift = 0.9
    rotated = expand(reconstruct(planar_field, quadrature.points - shift), 2, 1, bump.z_grid, quadrature)

    rho = np.array([0.5, 2.0, 6.0])
    zeta = np.array([-2.0, 0.3])
    original = extend(planar_field, bump, rho, zeta, phases=True)
    turned = extend(rotated, bump, rho, zeta, phases=True)
    for phi in (0.0, 1.1, 4.0):
        np.testing.assert_allclose(turned.evaluate(phi + shift), original.evaluate(phi), rtol=1e-10, atol=1e-12)

    np.testing.assert_allclose(extension_energy(rotated, surface_measure_factors(bump, 2), rho),
                               extension_energy(planar_field, surface_measure_factors(bump, 2), rho), rtol=1e-10)


def test_quotient_stable_under_doubling(bump):
    z = bump.z_grid.values
    entries = {HarmonicIndex(0, 1): 1 + z, HarmonicIndex(2, 1): np.sin(np.pi * z)}
    field = SphericalCoefficientField.from_entries(2, 2, bump.z_grid, entries)
    wider = SphericalCoefficientField.from_entries(2, 4, bump.z_grid, entries)

    grid = RadialGrid(r_max=64, panel_width=1.0)
    base = extension_quotient(field, bump, 6.0, grid)
    assert extension_quotient(wider, bump, 6.0, grid).value == pytest.approx(base.value, rel=1e-12)

    doubled = extension_quotient(field, bump, 6.0, grid.extended())
    assert doubled.value >= base.value
    assert doubled.value == pytest.approx(base.value, rel=1e-2)
    assert doubled.value_with_tail == pytest.approx(base.value_with_tail, rel=1e-2)


def test_quotient_tails_at_q6_and_q45(bump, planar_field):
    grid = RadialGrid(r_max=128, panel_width=1.0)
    steep = extension_quotient(planar_field, bump, 6.0, grid)
    shallow = extension_quotient(planar_field, bump, 4.5, grid)
    for quotient in (steep, shallow):
        assert quotient.radial.decays
        assert quotient.value < quotient.value_with_tail < math.inf
    assert steep.denominator == shallow.denominator
    # integrand rho^(1 - q/2): the lower exponent leaves more mass beyond r_max
    assert shallow.radial.tail / shallow.radial.value > steep.radial.tail / steep.radial.value


@pytest.mark.parametrize("q", [4.5, 6.0])
def test_lemma_blocks_decay_above_threshold(q):
    profile = ProfileFunction.cylinder(count=16)
    family = BesselWeightedFamily.single(1.0, profile.z_grid)
    grid = RadialGrid(r_max=512, panel_width=0.5)
    report = restriction_lemma_ratio(family, profile, q, grid, fit_blocks=range(4, 9))
    assert not report.divergent
    assert report.fitted_exponent == pytest.approx(predicted_block_exponent(q, 2), abs=0.2)


def test_regime_boundaries_are_half_open():
    profile = ProfileFunction.cylinder(count=16)

    def counts(*orders):
        family = BesselWeightedFamily(np.array(orders, dtype=float), np.ones((len(orders), 16)), profile.z_grid)
        return regime_split(family, profile, 64, 0.5).counts()

    assert counts(256.0) == {RegimeName.LOW: 0, RegimeName.CENTRAL: 0, RegimeName.HIGH: 1}
    assert counts(255.5) == {RegimeName.LOW: 0, RegimeName.CENTRAL: 1, RegimeName.HIGH: 0}
    assert counts(32.0) == {RegimeName.LOW: 0, RegimeName.CENTRAL: 1, RegimeName.HIGH: 0}
    assert counts(31.5) == {RegimeName.LOW: 1, RegimeName.CENTRAL: 0, RegimeName.HIGH: 0}


def test_all_orders_below_half_block_are_low():
    profile = ProfileFunction.cylinder(count=16)
    family = BesselWeightedFamily.spread(0, 32, profile.z_grid)
    partition = regime_split(family, profile, 64, 0.5, q=6.0)
    assert partition.counts() == {RegimeName.LOW: 32, RegimeName.CENTRAL: 0, RegimeName.HIGH: 0}
    assert partition.shares() == {RegimeName.LOW: pytest.approx(1.0), RegimeName.CENTRAL: 0.0,
                                  RegimeName.HIGH: 0.0}
    assert partition.window_counts.sum() == 0
    assert partition.block_integrals[RegimeName.LOW] > 0
    assert partition.block_integrals[RegimeName.CENTRAL] == 0
    assert partition.block_integrals[RegimeName.HIGH] == 0
