"""The extension operator f -> (f dGamma)^ for compact surfaces of revolution
Gamma = {(g(z) theta, z)} in R^(n+1), its mixed-norm quotient, and the
block-by-block verifier of the weighted Bessel restriction estimate.

Fourier convention: F(xi) = integral of F(y) e^(-i y.xi) dy, no
normalisation. With f = sum a_{k,j}(z) Y_k^j(theta),

    (f dGamma)^(rho phi, zeta) = sum Y_k^j(phi) (2 pi)^(n/2) (-i)^k rho^(-(n-2)/2)
                                 * int G2(z) a_{k,j}(z) J_{k+(n-2)/2}(rho g(z)) e^(-i z zeta) dz
"""
from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import jv

from .errors import (
    DomainError,
    GridMismatchError,
    NumericalResolutionError,
    ZeroDenominatorError,
)
from .grids_norms import ORIGIN, NormExponent, RadialGrid, RadialIntegral, radial_integral
from .helpers import parallel_map
from .spherical import (
    AngularQuadrature,
    HarmonicIndex,
    SphericalCoefficientField,
    ZGrid,
    plancherel_l2_on_gamma,
    sph_harmonic_eval,
)

logger = logging.getLogger(__name__)

DEFAULT_Z_COUNT = 256

#: Orders evaluated together when summing a weighted Bessel family.
ORDER_CHUNK = 16


@dataclass(frozen=True)
class ProfileFunction:
    """Samples of g and g' on a uniform grid over the compact support."""

    z_grid: ZGrid
    g: np.ndarray = field(repr=False)
    g_prime: np.ndarray = field(repr=False)
    name: str = "custom"

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        g_prime = np.asarray(self.g_prime, dtype=float)
        if g.shape != (self.z_grid.count,) or g_prime.shape != g.shape:
            raise GridMismatchError("profile samples do not match the z-grid")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(g_prime))):
            raise DomainError(f"profile {self.name!r} has non-finite samples")
        if np.any(g < 0):
            raise DomainError(f"profile {self.name!r} takes negative values")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g_prime", g_prime)

    @property
    def sup_A(self) -> float:
        return float(np.max(np.abs(self.g)))

    @property
    def sup_B(self) -> float:
        return float(np.max(np.abs(self.g_prime)))

    @property
    def is_constant(self) -> bool:
        return bool(np.ptp(self.g) == 0)

    def at(self, z: float) -> float:
        if not self.z_grid.z_min <= z <= self.z_grid.z_max:
            raise DomainError(f"z={z} outside the support [{self.z_grid.z_min}, {self.z_grid.z_max}]")
        return float(np.interp(z, self.z_grid.values, self.g))

    @classmethod
    def from_callable(cls, g: t.Callable, g_prime: t.Callable, interval: tuple[float, float],
                      count: int = DEFAULT_Z_COUNT, name: str = "custom") -> ProfileFunction:
        z_grid = ZGrid(interval[0], interval[1], count)
        z = z_grid.values
        return cls(z_grid, np.broadcast_to(g(z), z.shape), np.broadcast_to(g_prime(z), z.shape), name)

    @classmethod
    def from_samples(cls, z_grid: ZGrid, g, name: str = "sampled") -> ProfileFunction:
        """g' by second-order central differences (one-sided at the ends)."""
        g = np.asarray(g, dtype=float)
        return cls(z_grid, g, np.gradient(g, z_grid.values, edge_order=2), name)

    @classmethod
    def cylinder(cls, count: int = DEFAULT_Z_COUNT, interval=(0.0, 1.0),
                 radius: float = 1.0) -> ProfileFunction:
        return cls.from_callable(lambda z: np.full_like(z, radius), np.zeros_like, interval,
                                 count, "cylinder")

    @classmethod
    def cone(cls, count: int = DEFAULT_Z_COUNT, interval=(1.0, 2.0)) -> ProfileFunction:
        return cls.from_callable(lambda z: z, np.ones_like, interval, count, "cone")

    @classmethod
    def bump(cls, count: int = DEFAULT_Z_COUNT, interval=(0.0, 1.0)) -> ProfileFunction:
        return cls.from_callable(lambda z: 1 + z * (1 - z), lambda z: 1 - 2 * z, interval,
                                 count, "bump")

    @classmethod
    def truncated_sphere(cls, count: int = DEFAULT_Z_COUNT, interval=(-0.9, 0.9)) -> ProfileFunction:
        if not -1 < interval[0] < interval[1] < 1:
            raise DomainError("truncated sphere needs an interval inside (-1, 1)")
        return cls.from_callable(lambda z: np.sqrt(1 - z * z), lambda z: -z / np.sqrt(1 - z * z),
                                 interval, count, "truncated_sphere")


PROFILES: dict[str, t.Callable[..., ProfileFunction]] = {
    "cylinder": ProfileFunction.cylinder,
    "cone": ProfileFunction.cone,
    "bump": ProfileFunction.bump,
    "truncated_sphere": ProfileFunction.truncated_sphere,
}


def builtin_profile(name: str, count: int = DEFAULT_Z_COUNT) -> ProfileFunction:
    try:
        factory = PROFILES[name]
    except KeyError:
        raise DomainError(f"Unknown profile {name!r}, expected one of {sorted(PROFILES)}") from None
    return factory(count)


@dataclass(frozen=True)
class SurfaceOfRevolution:
    n: int
    profile: ProfileFunction
    G1: np.ndarray = field(repr=False)
    G2: np.ndarray = field(repr=False)

    @property
    def z_grid(self) -> ZGrid:
        return self.profile.z_grid

    @property
    def sphere_area(self) -> float:
        """|S^(n-1)|."""
        return 2 * math.pi ** (self.n / 2) / math.gamma(self.n / 2)


def surface_measure_factors(profile: ProfileFunction, n: int) -> SurfaceOfRevolution:
    """G1 = g^(n-1) sqrt(1+g'^2) (area factor) and G2 = g^(n/2) sqrt(1+g'^2)."""
    if n < 2:
        raise DomainError(f"surfaces of revolution need n >= 2, got {n}")
    slope = np.sqrt(1 + profile.g_prime ** 2)
    return SurfaceOfRevolution(n, profile, profile.g ** (n - 1) * slope, profile.g ** (n / 2) * slope)


def _coerce_surface(surface: SurfaceOfRevolution | ProfileFunction, n: int) -> SurfaceOfRevolution:
    if isinstance(surface, ProfileFunction):
        return surface_measure_factors(surface, n)
    if surface.n != n:
        raise GridMismatchError(f"surface lives in dimension n={surface.n}, field in n={n}")
    return surface


def _radial_nodes(rho_grid: RadialGrid | np.ndarray) -> np.ndarray:
    if isinstance(rho_grid, RadialGrid):
        return rho_grid.nodes
    return np.atleast_1d(np.asarray(rho_grid, dtype=float))


@dataclass(frozen=True)
class ZetaGrid:
    """Uniform zeta samples. ``from_z_grid`` gives the DFT frequencies of a
    (zero-padded) z-grid, sorted and centred on zero."""

    values: np.ndarray
    step: float
    fft_length: int | None = None

    @classmethod
    def from_z_grid(cls, z_grid: ZGrid, pad: int = 1) -> ZetaGrid:
        if pad < 1:
            raise DomainError("zero-padding factor must be >= 1")
        length = z_grid.count * pad
        values = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(length, d=z_grid.step))
        return cls(values, 2 * np.pi / (length * z_grid.step), length)


@dataclass
class ExtensionSamples:
    """Coefficients F_{k,j}(rho, zeta) of (f dGamma)^, shape (H, N_rho, N_zeta)."""

    n: int
    indices: tuple[HarmonicIndex, ...]
    rho: np.ndarray
    zeta: ZetaGrid
    coefficients: np.ndarray
    phases: bool

    def evaluate(self, phi) -> np.ndarray:
        """(f dGamma)^ at direction ``phi`` on the (rho, zeta) grid."""
        if not self.phases:
            raise DomainError("point values need the (-i)^k phases; extend with phases=True")
        basis = np.array([sph_harmonic_eval(self.n, idx, phi) for idx in self.indices])
        return np.tensordot(basis, self.coefficients, axes=1)


def _degree_rows(field: SphericalCoefficientField) -> dict[int, list[int]]:
    rows: dict[int, list[int]] = {}
    for row, idx in enumerate(field.indices):
        if np.any(field.coefficients[row] != 0):
            rows.setdefault(idx.k, []).append(row)
    return rows


def _weighted_profiles(field: SphericalCoefficientField, surface: SurfaceOfRevolution) -> np.ndarray:
    """Trapezoid weight x G2 x a_{k,j} per harmonic row."""
    return field.coefficients * (surface.G2 * field.z_grid.trapezoid_weights())


def _radial_prefactor(rho: np.ndarray, n: int) -> np.ndarray:
    if n == 2:
        return np.ones_like(rho)
    if np.any(rho <= 0):
        raise DomainError("rho must be positive for n > 2")
    return rho ** (-(n - 2) / 2)


def extend(field: SphericalCoefficientField, surface: SurfaceOfRevolution | ProfileFunction,
           rho_grid: RadialGrid | np.ndarray, zeta_grid: ZetaGrid | np.ndarray | None = None,
           phases: bool = False, pad: int = 1) -> ExtensionSamples:
    """Per-harmonic samples of (f dGamma)^.

    The z-integral is the trapezoid rule on the field's z-grid. On the
    default zeta grid (DFT frequencies of the z-grid padded ``pad`` times)
    it runs as an FFT; explicit zeta values use a direct Fourier sum and
    must stay below the Nyquist frequency pi / dz. Without ``phases`` the
    (-i)^k factor is dropped, which leaves every norm unchanged.
    """
    surface = _coerce_surface(surface, field.n)
    if surface.z_grid != field.z_grid:
        raise GridMismatchError("coefficient field and surface live on different z-grids")

    z_grid = field.z_grid
    rho = _radial_nodes(rho_grid)
    prefactor = (2 * np.pi) ** (field.n / 2) * _radial_prefactor(rho, field.n)

    if zeta_grid is None:
        zeta_grid = ZetaGrid.from_z_grid(z_grid, pad)
    elif not isinstance(zeta_grid, ZetaGrid):
        values = np.atleast_1d(np.asarray(zeta_grid, dtype=float))
        step = float(values[1] - values[0]) if len(values) > 1 else math.nan
        zeta_grid = ZetaGrid(values, step)

    nyquist = np.pi / z_grid.step
    if zeta_grid.fft_length is None and np.any(np.abs(zeta_grid.values) > nyquist):
        raise NumericalResolutionError(
            f"zeta up to {np.max(np.abs(zeta_grid.values)):.6g} beyond the z-grid Nyquist "
            f"frequency {nyquist:.6g}; refine the z-grid"
        )

    z = z_grid.values
    shift = np.exp(-1j * z_grid.z_min * zeta_grid.values)
    weighted = _weighted_profiles(field, surface)
    out = np.zeros((len(field.indices), len(rho), len(zeta_grid.values)), dtype=complex)
    degree_rows = _degree_rows(field)

    def transform(k: int) -> list[np.ndarray]:
        bessel = jv(k + (field.n - 2) / 2, rho[:, None] * surface.profile.g[None, :])
        results = []
        for row in degree_rows[k]:
            product = bessel * weighted[row]
            if zeta_grid.fft_length is not None:
                spectrum = np.fft.fftshift(np.fft.fft(product, n=zeta_grid.fft_length, axis=1), axes=1)
                results.append(spectrum * shift)
            else:
                results.append(product @ np.exp(-1j * np.outer(z, zeta_grid.values)))
        return results

    degrees = sorted(degree_rows)
    logger.debug(f"extending {sum(len(r) for r in degree_rows.values())} harmonics "
                 f"on {len(rho)} x {len(zeta_grid.values)} (rho, zeta) samples")
    for k, results in zip(degrees, parallel_map(transform, degrees)):
        phase = (-1j) ** k if phases else 1.0
        for row, spectrum in zip(degree_rows[k], results):
            out[row] = phase * prefactor[:, None] * spectrum

    return ExtensionSamples(field.n, field.indices, rho, zeta_grid, out, phases)


def extension_energy(field: SphericalCoefficientField, surface: SurfaceOfRevolution,
                     rho: np.ndarray) -> np.ndarray:
    """Sum over harmonics and the DFT zeta grid of |F_{k,j}(rho, zeta)|^2 dzeta.

    By discrete Parseval this is (2 pi / dz) times the squared l^2 norm of the
    trapezoid-weighted z samples, so no transform is needed.
    """
    z_grid = field.z_grid
    weighted = _weighted_profiles(field, surface)
    degree_rows = _degree_rows(field)
    factor = (2 * np.pi) ** field.n * _radial_prefactor(rho, field.n) ** 2 * (2 * np.pi / z_grid.step)

    def energy(k: int) -> np.ndarray:
        bessel = jv(k + (field.n - 2) / 2, rho[:, None] * surface.profile.g[None, :])
        total = np.zeros(len(rho))
        for row in degree_rows[k]:
            total += np.sum(np.abs(bessel * weighted[row]) ** 2, axis=1)
        return total

    degrees = sorted(degree_rows)
    total = np.zeros(len(rho))
    for part in parallel_map(energy, degrees):
        total += part
    return factor * total


@dataclass
class ExtensionQuotient:
    value: float
    numerator: float
    denominator: float
    q: float
    radial: RadialIntegral

    @property
    def value_with_tail(self) -> float:
        if not self.radial.decays:
            return math.inf
        return (self.radial.value + self.radial.tail) ** (1 / self.q) / self.denominator


def extension_quotient(field: SphericalCoefficientField, surface: SurfaceOfRevolution | ProfileFunction,
                       q: float, rho_grid: RadialGrid | None = None) -> ExtensionQuotient:
    """||(f dGamma)^||_{L^{q,2,2}} / ||f||_{L^2(Gamma)}."""
    if not q > 2:
        raise DomainError(f"extension exponent must exceed 2, got {q}")
    surface = _coerce_surface(surface, field.n)
    rho_grid = rho_grid or RadialGrid(panel_width=2.0)

    denominator = math.sqrt(plancherel_l2_on_gamma(field, surface.profile))
    if denominator == 0:
        raise ZeroDenominatorError("extension quotient of the zero field")

    inner = extension_energy(field, surface, rho_grid.nodes)
    radial = radial_integral(rho_grid.nodes ** (field.n - 1) * inner ** (q / 2), rho_grid)
    numerator = radial.value ** (1 / q)
    if not radial.decays:
        logger.warning(f"L^{q} extension norm does not decay beyond r_max={rho_grid.r_max:g}")
    return ExtensionQuotient(numerator / denominator, numerator, denominator, q, radial)


def brute_force_extension(f: t.Callable[[np.ndarray, np.ndarray], np.ndarray],
                          surface: SurfaceOfRevolution | ProfileFunction, rho: float, phi: float,
                          zeta: float, angular_nodes: int = 512) -> complex:
    """Direct quadrature of int f(y) e^(-i y.xi) dGamma(y) for n = 2.

    Trapezoid in z (the surface grid) and in theta; ``f`` takes broadcast
    arrays (z, theta).
    """
    surface = _coerce_surface(surface, 2)
    z = surface.z_grid.values
    theta = 2 * np.pi * np.arange(angular_nodes) / angular_nodes
    zz, tt = np.meshgrid(z, theta, indexing="ij")

    phase = rho * surface.profile.g[:, None] * np.cos(tt - phi) + zz * zeta
    integrand = np.asarray(f(zz, tt)) * np.exp(-1j * phase)
    weights = surface.z_grid.trapezoid_weights() * surface.G1
    return complex(weights @ integrand.sum(axis=1) * (2 * np.pi / angular_nodes))


@dataclass
class DualityPairing:
    lhs: complex
    rhs: complex

    @property
    def error(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.rhs), 1e-300)


def duality_pairing(field: SphericalCoefficientField, surface: SurfaceOfRevolution | ProfileFunction,
                    sigma: float = 0.15, center: float = 0.0, rho_grid: RadialGrid | None = None,
                    pad: int = 4) -> DualityPairing:
    """<(f dGamma)^, h> against <f, h^ on Gamma> for the Gaussian
    h(x, zeta) = exp(-sigma^2 (|x|^2 + (zeta - center)^2) / 2).

    Only the zonal k = 0 channel survives the angular integration of h;
    both sides use the same z rule.
    """
    if sigma <= 0:
        raise DomainError("Gaussian width sigma must be positive")
    surface = _coerce_surface(surface, field.n)
    rho_grid = rho_grid or RadialGrid(r_max=128, panel_width=1.0)
    n = field.n
    zonal = HarmonicIndex(0, 1)
    zonal_field = SphericalCoefficientField.from_entries(n, 0, field.z_grid, {zonal: field.entry(zonal)})

    samples = extend(zonal_field, surface, rho_grid, phases=True, pad=pad)
    zeta = samples.zeta.values
    rho = rho_grid.nodes
    gaussian = np.exp(-sigma ** 2 * (rho[:, None] ** 2 + (zeta[None, :] - center) ** 2) / 2)
    radial = np.sum(samples.coefficients[0] * gaussian, axis=1) * samples.zeta.step
    lhs = math.sqrt(surface.sphere_area) * np.sum(rho_grid.weights * rho ** (n - 1) * radial)

    z = field.z_grid.values
    h_hat = ((2 * np.pi / sigma ** 2) ** ((n + 1) / 2)
             * np.exp(-(surface.profile.g ** 2 + z ** 2) / (2 * sigma ** 2)) * np.exp(-1j * center * z))
    angular_mean = field.entry(zonal) * math.sqrt(surface.sphere_area)
    rhs = np.sum(field.z_grid.trapezoid_weights() * surface.G1 * h_hat * angular_mean)
    return DualityPairing(complex(lhs), complex(rhs))


@dataclass(frozen=True)
class BesselWeightedFamily:
    """Orders nu_j >= (n-2)/2 with weights b_j sampled on a z-grid, shape (J, count)."""

    orders: np.ndarray
    profiles: np.ndarray = field(repr=False)
    z_grid: ZGrid
    n: int = 2

    def __post_init__(self):
        orders = np.atleast_1d(np.asarray(self.orders, dtype=float))
        profiles = np.atleast_2d(np.asarray(self.profiles))
        if profiles.shape != (len(orders), self.z_grid.count):
            raise GridMismatchError(
                f"{profiles.shape} weight samples for {len(orders)} orders on {self.z_grid.count} z-nodes"
            )
        floor = (self.n - 2) / 2
        if np.any(orders < floor):
            raise DomainError(f"family orders must be >= (n-2)/2 = {floor}")
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "profiles", profiles)

    @classmethod
    def single(cls, nu: float, z_grid: ZGrid, b=1.0, n: int = 2) -> BesselWeightedFamily:
        return cls(np.array([nu]), np.broadcast_to(b, (1, z_grid.count)), z_grid, n)

    @classmethod
    def spread(cls, low: float, high: float, z_grid: ZGrid, spacing: float = 1.0,
               n: int = 2) -> BesselWeightedFamily:
        """Orders low, low+spacing, ... < high with constant weights of unit
        total mass sum_j int |b_j|^2 dz = 1."""
        orders = np.arange(low, high, spacing)
        if len(orders) == 0:
            raise DomainError(f"no orders in [{low}, {high})")
        length = z_grid.z_max - z_grid.z_min
        weight = 1 / math.sqrt(len(orders) * length)
        return cls(orders, np.full((len(orders), z_grid.count), weight), z_grid, n)

    def mass(self) -> np.ndarray:
        """int |b_j|^2 dz per order."""
        return self.z_grid.simpson(np.abs(self.profiles) ** 2, axis=-1)

    def rhs(self, q: float) -> float:
        return float(np.sum(self.mass())) ** (q / 2)


def _family_inner(family: BesselWeightedFamily, profile: ProfileFunction, rho: np.ndarray,
                  mask: np.ndarray | None = None) -> np.ndarray:
    """sum_j int |b_j(z)|^2 |J_{nu_j}(rho g(z))|^2 dz at every rho.

    ``mask`` (J, count) restricts each order to the z-nodes where it is True.
    """
    if family.z_grid != profile.z_grid:
        raise GridMismatchError("family and profile live on different z-grids")

    weights = np.abs(family.profiles) ** 2
    if mask is not None:
        weights = weights * mask
    chunks = [slice(i, i + ORDER_CHUNK) for i in range(0, len(family.orders), ORDER_CHUNK)]

    if profile.is_constant and mask is None:
        g0 = float(profile.g[0])
        mass = family.z_grid.simpson(weights, axis=-1)

        def chunk_sum(chunk: slice) -> np.ndarray:
            bessel = jv(family.orders[chunk, None], rho[None, :] * g0)
            return mass[chunk] @ bessel ** 2
    else:
        def chunk_sum(chunk: slice) -> np.ndarray:
            bessel = jv(family.orders[chunk, None, None], rho[None, :, None] * profile.g[None, None, :])
            integrand = weights[chunk, None, :] * bessel ** 2
            return family.z_grid.simpson(integrand, axis=-1).sum(axis=0)

    total = np.zeros(len(rho))
    for part in parallel_map(chunk_sum, chunks):
        total += part
    return total


def predicted_block_exponent(q: float, n: int) -> float:
    """-q(n-1)/2 + n; negative exactly when q > 2n/(n-1)."""
    return -q * (n - 1) / 2 + n


@dataclass
class RestrictionReport:
    lhs: float
    rhs: float
    ratio: float
    q: float
    n: int
    radial: RadialIntegral
    fitted_exponent: float
    predicted_exponent: float
    fit_blocks: tuple[int, ...]

    @property
    def divergent(self) -> bool:
        return not self.fitted_exponent < 0

    @property
    def ratio_with_tail(self) -> float:
        if self.rhs == 0:
            return 0.0
        if not self.radial.decays:
            return math.inf
        return (self.lhs + self.radial.tail) / self.rhs

    def block_rows(self) -> t.Iterator[dict[str, t.Any]]:
        for m, contribution in self.radial.contributions.items():
            if m != ORIGIN:
                yield {"m": m, "block_integral": contribution}


def fit_block_exponent(contributions: dict[int, float], blocks: t.Iterable[int]) -> float:
    """Least-squares slope of log2(block contribution) against m."""
    ms = [m for m in blocks if m in contributions and contributions[m] > 0]
    if len(ms) < 2:
        return math.nan
    values = np.log2([contributions[m] for m in ms])
    return float(np.polyfit(ms, values, 1)[0])


def restriction_lemma_ratio(family: BesselWeightedFamily, profile: ProfileFunction, q: float,
                            rho_grid: RadialGrid | None = None,
                            fit_blocks: t.Iterable[int] | None = None) -> RestrictionReport:
    """int rho^(-q(n-2)/2+n-1) (sum_j int |b_j|^2 |J_{nu_j}(rho g)|^2 dz)^(q/2) drho
    against (sum_j int |b_j|^2 dz)^(q/2), block by block.

    Exponents at or below 2n/(n-1) are evaluated anyway; the growing block
    contributions then show up in ``divergent``.
    """
    n = family.n
    exponent = NormExponent(q)
    if not exponent.admissible(n):
        logger.warning(f"q={q} at or below the restriction threshold {exponent.threshold(n):g}; "
                       f"expect non-decaying blocks")

    rho_grid = rho_grid or RadialGrid(panel_width=2.0)
    rho = rho_grid.nodes
    inner = _family_inner(family, profile, rho)
    radial = radial_integral(rho ** (-q * (n - 2) / 2 + n - 1) * inner ** (q / 2), rho_grid)

    rhs = family.rhs(q)
    lhs = radial.value
    ratio = 0.0 if rhs == 0 else lhs / rhs

    blocks = tuple(fit_blocks) if fit_blocks is not None else tuple(
        b.m for b in rho_grid.blocks if b.m >= 3)
    fitted = fit_block_exponent(radial.contributions, blocks)
    report = RestrictionReport(lhs, rhs, ratio, q, n, radial, fitted,
                               predicted_block_exponent(q, n), blocks)
    if rhs > 0 and report.divergent:
        logger.warning(f"block contributions do not decay at q={q} (fitted exponent {fitted:.3g})")
    return report


@dataclass
class LowFrequencySplit:
    I: float
    II: float
    bound_I: float
    bound_II: float
    rhs: float


def _gauss_interval(lo: float, hi: float, nodes: int = 32) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(nodes)
    half = (hi - lo) / 2
    return lo + half * (x + 1), half * w


def low_frequency_split(family: BesselWeightedFamily, profile: ProfileFunction, q: float,
                        nodes: int = 32) -> LowFrequencySplit:
    """The rho in [0, 1/A) and [1/A, 1) pieces of the [0, 1) integral with
    their bounds A^(q(n-1)/2-n) rhs and (1 + A^(q(n-1)/2-n)) rhs, A = sup g."""
    n = family.n
    a = profile.sup_A
    if a == 0:
        raise DomainError("profile vanishes identically")
    cut = min(1 / a, 1.0)
    power = -q * (n - 2) / 2 + n - 1

    def piece(lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        rho, w = _gauss_interval(lo, hi, nodes)
        inner = _family_inner(family, profile, rho)
        return float(np.sum(w * rho ** power * inner ** (q / 2)))

    rhs = family.rhs(q)
    scale = a ** (q * (n - 1) / 2 - n)
    return LowFrequencySplit(piece(0.0, cut), piece(cut, 1.0), scale * rhs, (1 + scale) * rhs, rhs)


class RegimeName:
    LOW = "I0"
    CENTRAL = "Ic"
    HIGH = "Iinf"


REGIMES = (RegimeName.LOW, RegimeName.CENTRAL, RegimeName.HIGH)


def _classify(orders: np.ndarray, m_block: float, g: float) -> np.ndarray:
    """0 for I0 = [0, Mg/2), 1 for Ic = [Mg/2, 4Mg), 2 for Iinf = [4Mg, inf)."""
    return np.where(orders < m_block * g / 2, 0, np.where(orders < 4 * m_block * g, 1, 2))


@dataclass
class RegimePartition:
    M: float
    z: float
    g: float
    labels: np.ndarray
    weights: dict[str, float]
    window_edges: np.ndarray
    window_counts: np.ndarray
    window_sums: np.ndarray
    block_integrals: dict[str, float] | None = None

    def members(self, regime: str) -> np.ndarray:
        return np.flatnonzero(self.labels == REGIMES.index(regime))

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.labels == i)) for i, name in enumerate(REGIMES)}

    def shares(self) -> dict[str, float]:
        total = sum(self.weights.values())
        if total == 0:
            return {name: 0.0 for name in REGIMES}
        return {name: value / total for name, value in self.weights.items()}


def turning_windows(m_block: float, g: float) -> np.ndarray:
    """Edges of G_alpha = [M/2 + alpha w, M/2 + (alpha+1) w), w = M^(1/3) g^(-2/3).

    alpha runs over 0..floor((Mg)^(2/3)) and further until the windows
    reach 2M.
    """
    if g <= 0:
        raise DomainError("turning windows need g(z) > 0")
    width = m_block ** (1 / 3) * g ** (-2 / 3)
    count = max(math.floor((m_block * g) ** (2 / 3)) + 1, math.ceil(1.5 * m_block / width))
    return m_block / 2 + width * np.arange(count + 1)


def regime_split(family: BesselWeightedFamily, profile: ProfileFunction, m_block: float, z: float,
                 q: float | None = None, panel_width: float = 2.0) -> RegimePartition:
    """Classify every nu_j into I0, Ic or Iinf at height z for block M, build
    the windows G_alpha and the window sums A_beta = sum |b_j(z)|^2 over
    nu_j / g(z) in G_beta.

    With ``q`` set, also split the block integral of the claim by regime,
    classifying pointwise in z.
    """
    g = profile.at(z)
    labels = _classify(family.orders, m_block, g)
    b_sq = np.array([np.interp(z, family.z_grid.values, np.abs(row) ** 2) for row in family.profiles])
    weights = {name: float(np.sum(b_sq[labels == i])) for i, name in enumerate(REGIMES)}

    edges = turning_windows(m_block, g) if g > 0 else np.array([m_block / 2])
    scaled = family.orders / g if g > 0 else np.full(len(family.orders), np.inf)
    slot = np.searchsorted(edges, scaled, side="right") - 1
    inside = (slot >= 0) & (slot < len(edges) - 1)
    counts = np.bincount(slot[inside], minlength=len(edges) - 1)
    sums = np.bincount(slot[inside], weights=b_sq[inside], minlength=len(edges) - 1)

    block_integrals = None
    if q is not None:
        rho, w = _block_nodes(m_block, panel_width)
        block_integrals = {}
        for i, name in enumerate(REGIMES):
            mask = np.stack([_classify(family.orders, m_block, gz) == i for gz in profile.g], axis=1)
            inner = _family_inner(family, profile, rho, mask)
            block_integrals[name] = float(np.sum(w * rho * inner ** (q / 2)))

    return RegimePartition(m_block, z, g, labels, weights, edges, counts, sums, block_integrals)


def _block_nodes(m_block: float, panel_width: float, nodes: int = 16) -> tuple[np.ndarray, np.ndarray]:
    panels = max(1, math.ceil(m_block / panel_width))
    x, w = leggauss(nodes)
    edges = np.linspace(m_block, 2 * m_block, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


@dataclass
class ClaimBlock:
    m: int
    M: float
    block_integral: float
    normalized: float
    bound: float
    shares: dict[str, float]

    @property
    def ok(self) -> bool:
        return self.block_integral <= self.bound

    def row(self) -> dict[str, t.Any]:
        return {
            "m": self.m,
            "block_integral": self.block_integral,
            "bound": self.bound,
            **{f"share_{name}": self.shares[name] for name in REGIMES},
        }


def dyadic_claim_check(family: BesselWeightedFamily, profile: ProfileFunction, q: float,
                       m_block: float, constant: float | None = None, band: float = 2.0,
                       panel_width: float = 2.0) -> tuple[ClaimBlock, float]:
    """int_M^2M rho (sum_j int |b_j|^2 |J_{nu_j}(rho g)|^2 dz)^(q/2) drho
    against C M^((4-q)/2) (sum_j int |b_j|^2 dz)^(q/2).

    Without ``constant``, C is calibrated on this block as ``band`` times
    the observed normalised value. Returns the block and the C used.
    """
    if not NormExponent(q).admissible(2):
        raise DomainError(f"the dyadic claim needs q > 4, got {q}")
    m_exp = math.log2(m_block)
    if m_block < 1 or m_exp != int(m_exp):
        raise DomainError(f"block start must be a power of two >= 1, got {m_block}")

    rho, w = _block_nodes(m_block, panel_width)
    inner = _family_inner(family, profile, rho)
    block_integral = float(np.sum(w * rho * inner ** (q / 2)))

    rhs = family.rhs(q)
    scale = m_block ** ((4 - q) / 2) * rhs
    normalized = block_integral / scale if scale > 0 else 0.0
    if constant is None:
        constant = band * normalized

    z_mid = (profile.z_grid.z_min + profile.z_grid.z_max) / 2
    shares = regime_split(family, profile, m_block, z_mid).shares()
    block = ClaimBlock(int(m_exp), m_block, block_integral, normalized, constant * scale, shares)
    return block, constant


@dataclass
class ClaimSweep:
    constant: float
    calibration: ClaimBlock
    blocks: list[ClaimBlock]

    @property
    def ok(self) -> bool:
        return all(block.ok for block in self.blocks)

    def rows(self) -> t.Iterator[dict[str, t.Any]]:
        for block in [self.calibration, *self.blocks]:
            yield block.row()


def claim_sweep(family: BesselWeightedFamily | t.Callable[[float], BesselWeightedFamily],
                profile: ProfileFunction, q: float, blocks: t.Sequence[float], band: float = 2.0,
                panel_width: float = 2.0) -> ClaimSweep:
    """Calibrate C on the first block, then check the remaining ones with C
    frozen. ``family`` may be a factory taking the block start M."""
    if len(blocks) < 2:
        raise DomainError("a claim sweep needs a calibration block and at least one more")

    def family_for(m_block: float) -> BesselWeightedFamily:
        return family(m_block) if callable(family) else family

    first, constant = dyadic_claim_check(family_for(blocks[0]), profile, q, blocks[0],
                                         band=band, panel_width=panel_width)
    checked = []
    for m_block in blocks[1:]:
        block, _ = dyadic_claim_check(family_for(m_block), profile, q, m_block, constant,
                                      panel_width=panel_width)
        if not block.ok:
            logger.warning(f"claim bound exceeded on block M={m_block:g}: "
                           f"{block.block_integral:.6g} > {block.bound:.6g}")
        checked.append(block)
    return ClaimSweep(constant, first, checked)
