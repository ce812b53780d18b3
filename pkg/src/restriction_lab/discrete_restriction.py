"""Exponential sums over frequencies on circles, spheres and the parabola:
the clustering statistic M, sliding unit-square L^p suprema and the
discrete restriction ratio, with a coefficient ascent for near-extremisers.

Two window engines are available. The grid engine samples the field on
cell midpoints (step <= 1/(8 bandwidth)) and slides the unit window with a
summed-area table. The spectral engine evaluates the quartic window
integral exactly from the sum-set expansion F^2 = sum_sigma g_sigma e(sigma.x),
and is used when a dense grid would be too large.
"""
from __future__ import annotations

import itertools
import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize
from scipy.spatial import cKDTree

from .errors import (
    DomainError,
    EmptyConfigurationError,
    NumericalResolutionError,
    ZeroDenominatorError,
)
from .helpers import parallel_map
from .typing import ComplexArray

logger = logging.getLogger(__name__)

OVERSAMPLING = 8
MAX_GRID_CELLS = 4096 ** 2
MAX_GRID_CELLS_3D = 256 ** 3
MAX_CONJECTURE_POINTS = 500
MAX_LATTICE_N = 10 ** 8
ON_SPHERE_TOLERANCE = 1e-9

#: Centres per axis in the spectral engine's coarse scan.
SPECTRAL_SCAN = 65
SPECTRAL_REFINE = 8
MAX_PAIR_SUMS = 4096


@dataclass(frozen=True)
class PointConfiguration:
    """Frequencies on the circle or sphere of radius R with complex coefficients."""

    dimension: int
    radius: float
    points: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    label: str = "custom"

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.dimension}")
        if not self.radius > 0:
            raise DomainError(f"radius must be positive, got {self.radius}")
        points = np.asarray(self.points, dtype=float).reshape(-1, self.dimension)
        coefficients = np.asarray(self.coefficients, dtype=complex).reshape(-1)
        if len(coefficients) != len(points):
            raise DomainError(f"{len(coefficients)} coefficients for {len(points)} points")
        if len(points):
            norms = np.linalg.norm(points, axis=1)
            if np.max(np.abs(norms - self.radius)) > ON_SPHERE_TOLERANCE * self.radius:
                raise DomainError(f"points are not on the sphere of radius {self.radius}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def frequencies(self) -> np.ndarray:
        return self.points

    @property
    def bandwidth(self) -> float:
        return self.radius

    def with_coefficients(self, coefficients) -> PointConfiguration:
        return PointConfiguration(self.dimension, self.radius, self.points, coefficients, self.label)

    def with_point(self, point, coefficient: complex = 1.0) -> PointConfiguration:
        return PointConfiguration(self.dimension, self.radius, np.vstack([self.points, point]),
                                  np.append(self.coefficients, coefficient), self.label)


@dataclass(frozen=True)
class ParabolaConfiguration:
    """Knots t_j with t_(j+1) - t_j >= 1; frequencies gamma(t) = (t, t^2)."""

    knots: np.ndarray
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).reshape(-1)
        coefficients = np.asarray(self.coefficients, dtype=complex).reshape(-1)
        if len(knots) == 0:
            raise EmptyConfigurationError("parabola configuration has no knots")
        if len(coefficients) != len(knots):
            raise DomainError(f"{len(coefficients)} coefficients for {len(knots)} knots")
        if np.any(np.diff(knots) < 1 - 1e-12):
            raise DomainError("parabola knots must be increasing with separation >= 1")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "coefficients", coefficients)

    dimension = 2

    @property
    def size(self) -> int:
        return len(self.knots)

    @property
    def frequencies(self) -> np.ndarray:
        return np.stack([self.knots, self.knots ** 2], axis=1)

    @property
    def bandwidth(self) -> float:
        return float(np.max(np.abs(self.frequencies)))

    def with_coefficients(self, coefficients) -> ParabolaConfiguration:
        return ParabolaConfiguration(self.knots, coefficients)


Configuration = t.Union[PointConfiguration, ParabolaConfiguration]


def lattice_points_on_circle(N: int) -> PointConfiguration:
    """All integer (x, y) with x^2 + y^2 = N, R = sqrt(N), unit coefficients."""
    if not 1 <= N <= MAX_LATTICE_N:
        raise DomainError(f"N must lie in [1, {MAX_LATTICE_N}], got {N}")
    points = []
    top = math.isqrt(N)
    for x in range(-top, top + 1):
        rest = N - x * x
        y = math.isqrt(rest)
        if y * y == rest:
            points.append((x, y))
            if y:
                points.append((x, -y))
    return PointConfiguration(2, math.sqrt(N), np.array(points, dtype=float).reshape(-1, 2),
                              np.ones(len(points)), f"lattice-{N}")


def lattice_points_on_sphere(N: int) -> PointConfiguration:
    """All integer points on x^2 + y^2 + z^2 = N."""
    if not 1 <= N <= 10 ** 6:
        raise DomainError(f"N must lie in [1, 10^6] for sphere enumeration, got {N}")
    top = math.isqrt(N)
    axis = np.arange(-top, top + 1)
    points = []
    for x in axis:
        rest = N - x * x - axis ** 2
        valid = rest >= 0
        z = np.sqrt(np.where(valid, rest, 0)).round().astype(np.int64)
        exact = valid & (z * z == rest)
        for y, zz in zip(axis[exact], z[exact]):
            points.append((x, y, zz))
            if zz:
                points.append((x, y, -zz))
    return PointConfiguration(3, math.sqrt(N), np.array(points, dtype=float).reshape(-1, 3),
                              np.ones(len(points)), f"sphere-lattice-{N}")


def _random_direction(rng: np.random.Generator, dimension: int) -> np.ndarray:
    v = rng.standard_normal(dimension)
    return v / np.linalg.norm(v)


def _random_coefficients(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.standard_normal(count) + 1j * rng.standard_normal(count)


def random_separated(R: float, K: int, rng: np.random.Generator, dimension: int = 2,
                     attempts: int = 10_000) -> PointConfiguration:
    """K points pairwise more than sqrt(R) apart (so M = 1) with random
    complex coefficients."""
    separation = math.sqrt(R)
    points: list[np.ndarray] = []
    for _ in range(attempts):
        if len(points) == K:
            break
        candidate = R * _random_direction(rng, dimension)
        if all(np.linalg.norm(candidate - p) > separation * (1 + 1e-9) for p in points):
            points.append(candidate)
    if len(points) < K:
        raise DomainError(f"could not place {K} sqrt(R)-separated points at R={R}")
    return PointConfiguration(dimension, R, np.array(points), _random_coefficients(rng, K),
                              f"separated-{dimension}d")


def cap_cluster(R: float, K: int, rng: np.random.Generator | None = None, dimension: int = 2,
                spread: float = 1.0) -> PointConfiguration:
    """K points in one cap of chord diameter spread * sqrt(R); M = K when spread <= 1.

    Unit coefficients; without ``rng`` the points are evenly spaced on the arc
    (2-D) or a golden-angle spiral (3-D).
    """
    if K < 1:
        raise DomainError("a cluster needs at least one point")
    half_angle = math.asin(min(1.0, spread * math.sqrt(R) / (2 * R))) * (1 - 1e-9)
    if dimension == 2:
        if rng is None:
            angles = np.linspace(-half_angle, half_angle, K) if K > 1 else np.zeros(1)
        else:
            angles = rng.uniform(-half_angle, half_angle, K)
        points = R * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        # cap around the north pole of angular radius half_angle
        if rng is None:
            index = np.arange(K) + 0.5
            polar = half_angle * np.sqrt(index / K)
            azimuth = np.pi * (1 + 5 ** 0.5) * index
        else:
            polar = half_angle * np.sqrt(rng.uniform(0, 1, K))
            azimuth = rng.uniform(0, 2 * np.pi, K)
        points = R * np.stack([np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth),
                               np.cos(polar)], axis=1)
    return PointConfiguration(dimension, R, points, np.ones(K), f"cap-{dimension}d")


def axis_points(R: float) -> PointConfiguration:
    """(+-R,0,0), (0,+-R,0), (0,0,+-R)."""
    points = np.vstack([R * np.eye(3), -R * np.eye(3)])
    return PointConfiguration(3, R, points, np.ones(6), "axis")


def parabola_knots(count: int, separation: float = 1.0, start: float = 0.0,
                   rng: np.random.Generator | None = None) -> ParabolaConfiguration:
    knots = start + separation * np.arange(count)
    coefficients = np.ones(count) if rng is None else _random_coefficients(rng, count)
    return ParabolaConfiguration(knots, coefficients)


def separation_M(config: PointConfiguration) -> int:
    """max_j #{k : |xi_k - xi_j| <= sqrt(R)}, k = j included."""
    if config.size == 0:
        raise EmptyConfigurationError("separation statistic of an empty configuration")
    tree = cKDTree(config.points)
    counts = tree.query_ball_point(config.points, r=math.sqrt(config.radius) * (1 + 1e-12),
                                   return_length=True)
    return int(np.max(counts))


def exp_sum(config: Configuration, x) -> ComplexArray:
    """sum_k a_k e^(2 pi i xi_k . x) by direct summation at points x of shape (N, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.exp(2j * np.pi * x @ config.frequencies.T) @ config.coefficients


@dataclass(frozen=True)
class Region:
    """Axis-aligned box lower + [0, side]^d sampled on cell midpoints."""

    lower: tuple[float, ...]
    side: float
    cells_per_unit: int

    @property
    def step(self) -> float:
        return 1 / self.cells_per_unit

    @property
    def cells(self) -> int:
        return int(round(self.side * self.cells_per_unit))

    def axis(self, i: int) -> np.ndarray:
        return self.lower[i] + (np.arange(self.cells) + 0.5) * self.step

    @classmethod
    def centred(cls, dimension: int, side: float, cells_per_unit: int, centre=None) -> Region:
        centre = np.zeros(dimension) if centre is None else np.asarray(centre, dtype=float)
        return cls(tuple(float(c) - side / 2 for c in centre), side, cells_per_unit)


def _cells_per_unit(config: Configuration, step: float | None) -> int:
    required = OVERSAMPLING * config.bandwidth
    if step is None:
        return max(OVERSAMPLING, math.ceil(required))
    cells = round(1 / step)
    if cells <= 0 or abs(cells * step - 1) > 1e-9:
        raise DomainError(f"step must be 1/integer so unit windows align with cells, got {step}")
    if cells < required:
        raise NumericalResolutionError(
            f"step {step:g} too coarse: need at most 1/({OVERSAMPLING} x {config.bandwidth:g})"
        )
    return cells


def exp_sum_field(config: Configuration, region: Region, exponent: float = 4.0) -> np.ndarray:
    """|F|^exponent on the region's cell midpoints.

    The phases factor over coordinates, e(xi.x) = prod_i e(xi_i x_i), so the
    2-D field is one matrix product and the 3-D field is built slab by slab.
    """
    if region.cells_per_unit < OVERSAMPLING * config.bandwidth:
        raise NumericalResolutionError(
            f"step {region.step:g} too coarse for bandwidth {config.bandwidth:g}"
        )
    d = config.dimension
    freq = config.frequencies
    a = config.coefficients
    factors = [np.exp(2j * np.pi * np.outer(region.axis(i), freq[:, i])) for i in range(d)]

    if d == 2:
        values = (factors[0] * a) @ factors[1].T
        return np.abs(values) ** exponent

    u, v, w = factors

    def slab(i: int) -> np.ndarray:
        return np.abs((v * (a * u[i])) @ w.T) ** exponent

    return np.stack(parallel_map(slab, list(range(region.cells))))


def summed_area_windows(values: np.ndarray, window: int) -> np.ndarray:
    """Sums of ``values`` over every window^d block, by prefix sums along
    each axis and inclusion-exclusion over the 2^d corners."""
    d = values.ndim
    if any(s < window for s in values.shape):
        raise DomainError("window larger than the sampled region")
    table = np.pad(values, [(1, 0)] * d)
    for axis in range(d):
        table = np.cumsum(table, axis=axis)

    size = [s - window + 1 for s in values.shape]
    total = np.zeros(size)
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(c * window, c * window + n) for c, n in zip(corner, size))
        sign = (-1) ** (d - sum(corner))
        total += sign * table[sl]
    return total


@dataclass
class SquareScanResult:
    center: np.ndarray
    value: float
    step: float
    engine: str
    exponent: float = 4.0

    @property
    def integral(self) -> float:
        return self.value ** self.exponent


def _grid_scan(config: Configuration, side: float, cells: int, exponent: float,
               origin=None) -> SquareScanResult:
    d = config.dimension
    region = Region.centred(d, side, cells, origin)
    cap = MAX_GRID_CELLS if d == 2 else MAX_GRID_CELLS_3D
    if region.cells ** d > cap:
        raise NumericalResolutionError(
            f"{region.cells}^{d} cells exceed the dense-grid cap; lower R or use the spectral engine"
        )
    values = exp_sum_field(config, region, exponent)
    windows = summed_area_windows(values, cells) * region.step ** d
    best = np.unravel_index(int(np.argmax(windows)), windows.shape)
    center = np.array([region.lower[i] + (best[i] + cells / 2) * region.step for i in range(d)])
    return SquareScanResult(center, float(windows[best]) ** (1 / exponent), region.step, "grid", exponent)


class SumSetExpansion:
    """F^2 = sum_sigma g_sigma e(sigma.x) over the merged pair sums
    sigma = xi_k + xi_l, with the sinc products of their differences.

    The quartic window integral over the unit square at c is
    sum g_sigma conj(g_sigma') sinc(sigma - sigma') e((sigma - sigma').c).
    """

    def __init__(self, config: Configuration):
        freq = config.frequencies
        k = len(freq)
        left, right = np.triu_indices(k)
        sums = freq[left] + freq[right]
        keys = np.round(sums, 9)
        self.sums, inverse = np.unique(keys, axis=0, return_inverse=True)
        if len(self.sums) > MAX_PAIR_SUMS:
            raise NumericalResolutionError(
                f"{len(self.sums)} pair sums exceed the spectral engine cap of {MAX_PAIR_SUMS}"
            )
        self.pair_index = np.zeros((k, k), dtype=np.int64)
        self.pair_index[left, right] = inverse.reshape(-1)
        self.pair_index[right, left] = inverse.reshape(-1)
        self.size = k
        self.dimension = freq.shape[1]

        diff = self.sums[:, None, :] - self.sums[None, :, :]
        self.sinc = np.prod(np.sinc(diff), axis=-1)

    def coefficients(self, a: np.ndarray) -> np.ndarray:
        products = np.outer(a, a)
        g = np.zeros(len(self.sums), dtype=complex)
        np.add.at(g, self.pair_index.ravel(), products.ravel())
        return g

    def phases(self, centres: np.ndarray) -> np.ndarray:
        return np.exp(2j * np.pi * np.atleast_2d(centres) @ self.sums.T)

    def integrals(self, a: np.ndarray, centres) -> np.ndarray:
        v = self.coefficients(a) * self.phases(centres)
        return np.real(np.sum((v @ self.sinc) * np.conj(v), axis=1))

    def gradient(self, a: np.ndarray, centre) -> np.ndarray:
        """Wirtinger gradient dJ/d conj(a_k) = 2 sum_l T_(kl) conj(a_l) of the
        window integral J at ``centre``."""
        p = self.phases(centre)[0]
        v = self.coefficients(a) * p
        pair_values = np.conj(p) * (v @ self.sinc)
        return 2 * pair_values[self.pair_index] @ np.conj(a)


def window_quartic_integral(config: Configuration, centre) -> float:
    """Exact int over the unit square at ``centre`` of |F|^4 (2-D) or the unit cube (3-D)."""
    if config.size == 0:
        return 0.0
    return float(SumSetExpansion(config).integrals(config.coefficients, np.asarray(centre))[0])


def _spectral_scan(config: Configuration, side: float, origin=None) -> SquareScanResult:
    if config.dimension != 2:
        raise DomainError("the spectral engine scans unit squares in the plane")
    expansion = SumSetExpansion(config)
    a = config.coefficients
    origin = np.zeros(2) if origin is None else np.asarray(origin, dtype=float)
    half = (side - 1) / 2

    axis = origin[0] + np.linspace(-half, half, SPECTRAL_SCAN), origin[1] + np.linspace(-half, half, SPECTRAL_SCAN)
    grid = np.stack(np.meshgrid(*axis, indexing="ij"), axis=-1).reshape(-1, 2)
    values = expansion.integrals(a, grid)
    seeds = grid[np.argsort(values)[::-1][:SPECTRAL_REFINE]]

    def refine(start: np.ndarray) -> tuple[float, np.ndarray]:
        result = optimize.minimize(lambda c: -expansion.integrals(a, c)[0], start, method="L-BFGS-B",
                                   bounds=[(o - half, o + half) for o in origin])
        return -float(result.fun), np.asarray(result.x)

    best_value, best_centre = max(parallel_map(refine, list(seeds)), key=lambda item: item[0])
    best_value = max(best_value, float(values.max()))
    logger.debug(f"spectral scan over {len(expansion.sums)} pair sums: best {best_value:.6g}")
    return SquareScanResult(best_centre, best_value ** 0.25, 1 / SPECTRAL_SCAN, "spectral", 4.0)


def sup_square_scan(config: Configuration, side: float = 3.0, step: float | None = None,
                    exponent: float = 4.0, engine: str = "auto", origin=None) -> SquareScanResult:
    """sup over axis-aligned unit windows in the region of side ``side`` of
    (int_Q |F|^exponent)^(1/exponent)."""
    min_side = 3.0 if config.dimension == 2 else 1.0
    if side < min_side:
        raise DomainError(f"search region side must be >= {min_side:g}, got {side}")
    if config.size == 0:
        raise EmptyConfigurationError("scan of an empty configuration")

    if engine == "auto":
        cells = _cells_per_unit(config, step)
        dense = round(side * cells) ** config.dimension
        cap = MAX_GRID_CELLS if config.dimension == 2 else MAX_GRID_CELLS_3D
        engine = "grid" if dense <= cap or exponent != 4 or config.dimension != 2 else "spectral"
    if engine == "grid":
        return _grid_scan(config, side, _cells_per_unit(config, step), exponent, origin)
    if engine == "spectral":
        if exponent != 4:
            raise DomainError("the spectral engine handles the quartic window only")
        return _spectral_scan(config, side, origin)
    raise DomainError(f"unknown scan engine {engine!r}")


def window_integral(config: Configuration, centre, exponent: float = 4.0, nodes: int = 256) -> float:
    """Tensor Gauss-Legendre quadrature of |F|^exponent over the unit window at ``centre``."""
    x, w = leggauss(nodes)
    x, w = x / 2, w / 2
    d = config.dimension
    grids = np.meshgrid(*[x] * d, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1) + np.asarray(centre, dtype=float)
    weights = np.prod(np.stack(np.meshgrid(*[w] * d, indexing="ij")), axis=0).ravel()
    return float(np.sum(weights * np.abs(exp_sum(config, points)) ** exponent))


def _coefficient_norm(config: Configuration) -> float:
    norm = float(np.linalg.norm(config.coefficients))
    if norm == 0:
        raise ZeroDenominatorError("ratio statistic with all coefficients zero")
    return norm


@dataclass
class RatioResult:
    ratio: float
    scan: SquareScanResult
    M: int
    coefficient_norm: float

    def row(self) -> dict[str, t.Any]:
        return {"M": self.M, "ratio": self.ratio, "step": self.scan.step, "engine": self.scan.engine}


def ratio_statistic(config: PointConfiguration, side: float = 3.0, step: float | None = None,
                    exponent: float = 4.0, engine: str = "auto") -> RatioResult:
    """sup-window norm / (M^(1/2) ||a||_2)."""
    norm = _coefficient_norm(config)
    m_stat = separation_M(config)
    scan = sup_square_scan(config, side, step, exponent, engine)
    return RatioResult(scan.value / (math.sqrt(m_stat) * norm), scan, m_stat, norm)


def parabola_ratio(config: ParabolaConfiguration, side: float = 3.0, step: float | None = None,
                   exponent: float = 4.0, engine: str = "auto") -> RatioResult:
    """sup-window norm / ||a||_2; knot separation stands in for M."""
    norm = _coefficient_norm(config)
    scan = sup_square_scan(config, side, step, exponent, engine)
    return RatioResult(scan.value / norm, scan, 1, norm)


def conjecture_experiment(config: PointConfiguration, side: float = 2.0, step: float | None = None,
                          exponent: float = 3.0) -> RatioResult:
    """Windowed L^3 norm over unit cubes in R^3 against M^(1/2) ||a||_2.

    The bound it tests is a conjecture; results carry no pass/fail.
    """
    if config.dimension != 3:
        raise DomainError("the conjecture explorer works on spheres in R^3")
    if config.size > MAX_CONJECTURE_POINTS:
        raise DomainError(f"at most {MAX_CONJECTURE_POINTS} points, got {config.size}")
    return ratio_statistic(config, side, step, exponent, engine="grid")


class _Window:
    """Quartic window integral and its coefficient gradient at a fixed centre."""

    def __init__(self, config: Configuration, centre: np.ndarray, engine: str, cells: int | None):
        self.config = config
        self.centre = np.asarray(centre, dtype=float)
        self.engine = engine
        if engine == "spectral":
            self.expansion = SumSetExpansion(config)
        else:
            region = Region.centred(config.dimension, 1.0, cells, self.centre)
            freq = config.frequencies
            self.step = region.step
            self.factors = [np.exp(2j * np.pi * np.outer(region.axis(i), freq[:, i]))
                            for i in range(config.dimension)]

    def _field(self, a: np.ndarray) -> np.ndarray:
        u, v = self.factors
        return (u * a) @ v.T

    def value(self, a: np.ndarray) -> float:
        if self.engine == "spectral":
            return float(self.expansion.integrals(a, self.centre)[0])
        return float(np.sum(np.abs(self._field(a)) ** 4) * self.step ** 2)

    def gradient(self, a: np.ndarray) -> np.ndarray:
        if self.engine == "spectral":
            return self.expansion.gradient(a, self.centre)
        f = self._field(a)
        weight = np.abs(f) ** 2 * f
        u, v = self.factors
        return 2 * self.step ** 2 * np.einsum("ik,ij,jk->k", np.conj(u), weight, np.conj(v))


@dataclass
class AscentResult:
    best_coefficients: np.ndarray
    best_ratio: float
    initial_ratio: float
    history: list[float]


def maximize_ratio(config: PointConfiguration, iterations: int = 100, seed: int = 0,
                   step: float | None = None, side: float = 3.0, rescan_every: int = 10,
                   learning_rate: float = 0.1) -> AscentResult:
    """Projected gradient ascent of the ratio over unit-norm coefficients.

    Coefficients are parametrised by modulus and phase; the gradient is the
    analytic derivative of the quartic window integral at the current best
    square, which is re-scanned every ``rescan_every`` steps. The reported
    ratio never decreases.
    """
    if config.size == 0:
        raise EmptyConfigurationError("ascent on an empty configuration")
    if config.dimension != 2:
        raise DomainError("coefficient ascent scans unit squares in the plane")

    rng = np.random.default_rng(seed)
    m_stat = separation_M(config)
    scale = math.sqrt(m_stat)

    modulus = np.abs(config.coefficients) + 0.1 * rng.uniform(0, 1, config.size)
    phase = np.angle(config.coefficients) + 0.1 * rng.standard_normal(config.size)
    modulus /= np.linalg.norm(modulus)

    def coefficients() -> np.ndarray:
        return modulus * np.exp(1j * phase)

    def scan(a: np.ndarray) -> SquareScanResult:
        return sup_square_scan(config.with_coefficients(a), side, step)

    current = scan(coefficients())
    initial = current.value / scale
    best_ratio, best_a = initial, coefficients()
    history = [best_ratio]

    if config.size == 1:
        return AscentResult(best_a, best_ratio, initial, history)

    cells = None if current.engine == "spectral" else _cells_per_unit(config, step)
    window = _Window(config, current.center, current.engine, cells)
    rate = learning_rate

    for iteration in range(1, iterations + 1):
        a = coefficients()
        value = window.value(a)
        grad = window.gradient(a)
        rotation = grad * np.exp(-1j * phase)
        d_modulus = 2 * np.real(rotation)
        d_phase = 2 * modulus * np.imag(rotation)

        improved = False
        for _ in range(20):
            trial_modulus = np.clip(modulus + rate * d_modulus, 0, None)
            norm = np.linalg.norm(trial_modulus)
            if norm == 0:
                rate /= 2
                continue
            trial_modulus /= norm
            trial_phase = phase + rate * d_phase
            if window.value(trial_modulus * np.exp(1j * trial_phase)) > value:
                modulus, phase = trial_modulus, trial_phase
                improved = True
                break
            rate /= 2

        if iteration % rescan_every == 0 or not improved:
            current = scan(coefficients())
            window = _Window(config, current.center, current.engine, cells)
            ratio = current.value / scale
            if ratio > best_ratio:
                best_ratio, best_a = ratio, coefficients()
            rate = learning_rate
        else:
            ratio = window.value(coefficients()) ** 0.25 / scale
            if ratio > best_ratio:
                best_ratio, best_a = ratio, coefficients()
        history.append(best_ratio)

        if not improved:
            logger.debug(f"ascent stalled at iteration {iteration}, ratio {best_ratio:.6g}")
            break

    return AscentResult(best_a, best_ratio, initial, history)
