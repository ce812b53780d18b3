"""Real orthonormal spherical harmonics on S^1 and S^2, angular quadrature,
and expansion of functions f(z, theta) on a surface of revolution into
coefficient profiles a_{k,j}(z).
"""
from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson
from scipy.special import gammaln, lpmv

from .errors import DomainError, GridMismatchError, InvalidHarmonicError, NumericalResolutionError

if t.TYPE_CHECKING:
    from .surface_extension import ProfileFunction

logger = logging.getLogger(__name__)

DEFAULT_K_MAX = {2: 32, 3: 16}

SUPPORTED_DIMENSIONS = (2, 3)


def harmonic_dimension(n: int, k: int) -> int:
    """d(k), the number of orthonormal harmonics of degree k on S^{n-1}."""
    if n not in SUPPORTED_DIMENSIONS:
        raise InvalidHarmonicError(f"Only S^1 (n=2) and S^2 (n=3) are supported, got n={n}")
    if k < 0:
        raise InvalidHarmonicError(f"Degree must be >= 0, got {k}")
    if n == 2:
        return 1 if k == 0 else 2
    return 2 * k + 1


@dataclass(frozen=True, order=True)
class HarmonicIndex:
    """Degree ``k`` and member ``j`` (1-based).

    On S^1 member 1 is cos(k theta) and member 2 is sin(k theta). On S^2
    member j carries azimuthal order m = j - k - 1 (m < 0 sine, m > 0
    cosine), so the zonal member of degree k is j = k + 1.
    """

    k: int
    j: int

    def validate(self, n: int) -> HarmonicIndex:
        d = harmonic_dimension(n, self.k)
        if not 1 <= self.j <= d:
            raise InvalidHarmonicError(
                f"Member j={self.j} outside [1, {d}] for degree k={self.k} on S^{n - 1}"
            )
        return self

    def order(self, n: int) -> float:
        """Bessel order nu_k = k + (n - 2) / 2 attached to this degree."""
        return self.k + (n - 2) / 2


def harmonic_indices(n: int, k_max: int) -> tuple[HarmonicIndex, ...]:
    return tuple(
        HarmonicIndex(k, j)
        for k in range(k_max + 1)
        for j in range(1, harmonic_dimension(n, k) + 1)
    )


def _circle_harmonic(idx: HarmonicIndex, theta: np.ndarray) -> np.ndarray:
    if idx.k == 0:
        return np.full(np.shape(theta), 1 / math.sqrt(2 * math.pi))
    if idx.j == 1:
        return np.cos(idx.k * theta) / math.sqrt(math.pi)
    return np.sin(idx.k * theta) / math.sqrt(math.pi)


def _sphere_harmonic(idx: HarmonicIndex, polar: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    k = idx.k
    m = idx.j - k - 1
    am = abs(m)
    norm = math.sqrt((2 * k + 1) / (4 * math.pi) * math.exp(gammaln(k - am + 1) - gammaln(k + am + 1)))
    # lpmv carries the Condon-Shortley phase; the real basis drops it
    legendre = (-1) ** am * lpmv(am, k, np.cos(polar))

    if m == 0:
        return norm * legendre
    if m > 0:
        return math.sqrt(2) * norm * legendre * np.cos(am * azimuth)
    return math.sqrt(2) * norm * legendre * np.sin(am * azimuth)


def sph_harmonic_eval(n: int, idx: HarmonicIndex, theta) -> np.ndarray | float:
    """Evaluate the real orthonormal harmonic Y_k^j.

    ``theta`` is an angle (array) on S^1, or an array whose last axis holds
    (polar, azimuth) on S^2.
    """
    idx.validate(n)
    scalar = np.ndim(theta) == (0 if n == 2 else 1)

    if n == 2:
        values = _circle_harmonic(idx, np.asarray(theta, dtype=float))
    else:
        angles = np.asarray(theta, dtype=float)
        if angles.shape[-1] != 2:
            raise DomainError("Points on S^2 are given as (polar, azimuth) pairs")
        values = _sphere_harmonic(idx, angles[..., 0], angles[..., 1])

    if scalar:
        return float(values)
    return values


@dataclass(frozen=True)
class AngularQuadrature:
    """Nodes and weights on S^{n-1}; ``exact_degree`` is the largest total
    harmonic degree integrated exactly."""

    n: int
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @classmethod
    def circle(cls, nodes: int) -> AngularQuadrature:
        theta = 2 * math.pi * np.arange(nodes) / nodes
        weights = np.full(nodes, 2 * math.pi / nodes)
        return cls(2, theta, weights, nodes - 1)

    @classmethod
    def sphere(cls, degree: int) -> AngularQuadrature:
        """Product Gauss-Legendre (in cos polar) x trapezoid (azimuth) grid
        exact for harmonics of total degree <= ``degree``."""
        n_polar = degree // 2 + 1
        n_azimuth = degree + 1
        x, w = leggauss(n_polar)
        polar = np.arccos(x)
        azimuth = 2 * math.pi * np.arange(n_azimuth) / n_azimuth
        pp, aa = np.meshgrid(polar, azimuth, indexing="ij")
        points = np.stack([pp.ravel(), aa.ravel()], axis=-1)
        weights = np.outer(w, np.full(n_azimuth, 2 * math.pi / n_azimuth)).ravel()
        return cls(3, points, weights, degree)

    @classmethod
    def for_degree(cls, n: int, k_max: int) -> AngularQuadrature:
        """Default grid for expansions up to ``k_max``: 4 k_max trapezoid
        nodes on S^1, a degree-2 k_max product grid on S^2."""
        if n == 2:
            return cls.circle(max(4 * k_max, 4))
        return cls.sphere(2 * k_max)

    @property
    def size(self) -> int:
        return len(self.weights)

    def basis(self, indices: t.Sequence[HarmonicIndex]) -> np.ndarray:
        """Matrix Y[h, node] of the harmonics at the quadrature nodes."""
        return np.stack([np.asarray(sph_harmonic_eval(self.n, idx, self.points)) for idx in indices])


@dataclass(frozen=True)
class ZGrid:
    """Uniform grid on [z_min, z_max] with a power-of-two sample count."""

    z_min: float
    z_max: float
    count: int

    def __post_init__(self):
        if self.count < 4 or self.count & (self.count - 1):
            raise DomainError(f"z-grid count must be a power of two >= 4, got {self.count}")
        if not self.z_max > self.z_min:
            raise DomainError("z-grid needs z_max > z_min")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.count)

    @property
    def step(self) -> float:
        return (self.z_max - self.z_min) / (self.count - 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.count, self.step)
        w[0] = w[-1] = self.step / 2
        return w

    def simpson(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return simpson(values, x=self.values, axis=axis)


@dataclass(frozen=True)
class SphericalCoefficientField:
    """Coefficient profiles a_{k,j}(z_i), stored as an (H, count) array
    aligned with ``indices``. Entries above ``k_max`` are absent."""

    n: int
    k_max: int
    z_grid: ZGrid
    indices: tuple[HarmonicIndex, ...]
    coefficients: np.ndarray
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients)
        if coefficients.shape != (len(self.indices), self.z_grid.count):
            raise GridMismatchError(
                f"coefficients of shape {coefficients.shape} do not match "
                f"{len(self.indices)} harmonics x {self.z_grid.count} z-samples"
            )
        if not np.all(np.isfinite(coefficients)):
            raise DomainError("coefficient field has non-finite values")
        for idx in self.indices:
            idx.validate(self.n)
            if idx.k > self.k_max:
                raise InvalidHarmonicError(f"entry {idx} above truncation degree {self.k_max}")

        coefficients = coefficients.copy()
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "_lookup", {idx: row for row, idx in enumerate(self.indices)})

    @classmethod
    def zeros(cls, n: int, k_max: int, z_grid: ZGrid) -> SphericalCoefficientField:
        indices = harmonic_indices(n, k_max)
        return cls(n, k_max, z_grid, indices, np.zeros((len(indices), z_grid.count)))

    @classmethod
    def from_entries(cls, n: int, k_max: int, z_grid: ZGrid,
                     entries: t.Mapping[HarmonicIndex, np.ndarray | float]) -> SphericalCoefficientField:
        indices = harmonic_indices(n, k_max)
        coefficients = np.zeros((len(indices), z_grid.count), dtype=np.result_type(
            float, *[np.asarray(v).dtype for v in entries.values()]))
        lookup = {idx: row for row, idx in enumerate(indices)}
        for idx, value in entries.items():
            idx.validate(n)
            if idx not in lookup:
                raise InvalidHarmonicError(f"entry {idx} above truncation degree {k_max}")
            coefficients[lookup[idx]] = np.broadcast_to(value, (z_grid.count,))
        return cls(n, k_max, z_grid, indices, coefficients)

    def entry(self, idx: HarmonicIndex) -> np.ndarray:
        if idx not in self._lookup:
            return np.zeros(self.z_grid.count)
        return self.coefficients[self._lookup[idx]]

    def scaled(self, factor: complex) -> SphericalCoefficientField:
        return SphericalCoefficientField(self.n, self.k_max, self.z_grid, self.indices,
                                         self.coefficients * factor)

    def coefficient_rows(self) -> t.Iterator[dict[str, t.Any]]:
        """Columnar rows (k, j, z_index, value)."""
        for row, idx in enumerate(self.indices):
            for i, value in enumerate(self.coefficients[row]):
                yield {"k": idx.k, "j": idx.j, "z_index": i, "value": value}


def expand(samples: np.ndarray, n: int, k_max: int, z_grid: ZGrid,
           quadrature: AngularQuadrature | None = None) -> SphericalCoefficientField:
    """a_{k,j}(z_i) = integral of f(z_i, theta) Y_k^j(theta) over S^{n-1}.

    ``samples`` has shape (z_grid.count, quadrature.size).
    """
    quadrature = quadrature or AngularQuadrature.for_degree(n, k_max)
    if quadrature.n != n:
        raise GridMismatchError(f"quadrature lives on S^{quadrature.n - 1}, expected S^{n - 1}")
    if quadrature.exact_degree < 2 * k_max:
        raise NumericalResolutionError(
            f"angular quadrature exact to degree {quadrature.exact_degree}, "
            f"expansion to K_max={k_max} needs {2 * k_max}"
        )

    samples = np.asarray(samples)
    if samples.shape != (z_grid.count, quadrature.size):
        raise GridMismatchError(
            f"samples of shape {samples.shape}, expected {(z_grid.count, quadrature.size)}"
        )

    indices = harmonic_indices(n, k_max)
    basis = quadrature.basis(indices)
    coefficients = (basis * quadrature.weights) @ samples.T
    return SphericalCoefficientField(n, k_max, z_grid, indices, coefficients)


def reconstruct(field: SphericalCoefficientField, points) -> np.ndarray:
    """f(z_i, theta) at the angular ``points``; shape (count, n_points)."""
    basis = np.stack([
        np.atleast_1d(sph_harmonic_eval(field.n, idx, points)) for idx in field.indices
    ])
    return field.coefficients.T @ basis


def plancherel_l2_on_gamma(field: SphericalCoefficientField, profile: ProfileFunction) -> float:
    """Sum over harmonics of the integral of |a_{k,j}|^2 G1 dz (Simpson),
    the squared L^2(Gamma) norm of f."""
    if profile.z_grid != field.z_grid:
        raise GridMismatchError("coefficient field and profile live on different z-grids")

    from .surface_extension import surface_measure_factors

    g1 = surface_measure_factors(profile, field.n).G1
    energy = np.sum(np.abs(field.coefficients) ** 2, axis=0)
    return float(field.z_grid.simpson(energy * g1))
