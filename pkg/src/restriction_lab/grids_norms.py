"""Dyadic radial quadrature and the mixed norms L^p_rad L^2_ang and L^{p,2,2}."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from werkzeug.utils import cached_property

from .errors import DomainError, EmptyConfigurationError, GridMismatchError
from .spherical import AngularQuadrature, ZGrid

logger = logging.getLogger(__name__)

DEFAULT_R_MAX = 2.0 ** 10
DEFAULT_NODES = 16

#: Label used for the [0, 1) panel in block contribution maps.
ORIGIN = -1


@dataclass(frozen=True)
class DyadicBlock:
    """[lo, hi) with hi = 2 lo, or the origin panel [0, 1) when m is ORIGIN."""

    m: int
    lo: float
    hi: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def is_origin(self) -> bool:
        return self.m == ORIGIN


def _gauss_panels(lo: float, hi: float, nodes: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


class RadialGrid:
    """Composite Gauss-Legendre grid on [0,1) followed by the dyadic blocks
    [2^m, 2^(m+1)) up to ``r_max``.

    With ``panel_width`` set, each block is cut into panels no wider than
    that so the node density per unit length stays fixed on long blocks.
    ``m_min`` > 0 drops the origin panel and the blocks below 2^m_min.
    """

    def __init__(self, r_max: float = DEFAULT_R_MAX, nodes_per_block: int = DEFAULT_NODES,
                 origin_nodes: int = DEFAULT_NODES, panel_width: float | None = None,
                 m_min: int = 0):
        m_top = math.log2(r_max) if r_max > 0 else -1
        if r_max < 1 or m_top != int(m_top):
            raise DomainError(f"r_max must be a power of two >= 1, got {r_max}")
        if nodes_per_block < 1 or origin_nodes < 1:
            raise DomainError("node counts must be positive")
        if panel_width is not None and panel_width <= 0:
            raise DomainError("panel_width must be positive")
        if m_min < 0 or (m_min > 0 and m_min >= int(m_top)):
            raise DomainError(f"m_min={m_min} leaves no blocks below r_max={r_max}")

        self.r_max = float(r_max)
        self.nodes_per_block = nodes_per_block
        self.origin_nodes = origin_nodes
        self.panel_width = panel_width
        self.m_min = m_min

        blocks = []
        if m_min == 0:
            nodes, weights = _gauss_panels(0.0, 1.0, origin_nodes, self._panels(1.0))
            blocks.append(DyadicBlock(ORIGIN, 0.0, 1.0, nodes, weights))
        for m in range(m_min, int(m_top)):
            lo, hi = 2.0 ** m, 2.0 ** (m + 1)
            nodes, weights = _gauss_panels(lo, hi, nodes_per_block, self._panels(hi - lo))
            blocks.append(DyadicBlock(m, lo, hi, nodes, weights))
        self.blocks: tuple[DyadicBlock, ...] = tuple(blocks)

    def _panels(self, width: float) -> int:
        if self.panel_width is None:
            return 1
        return max(1, math.ceil(width / self.panel_width - 1e-12))

    def __repr__(self):
        return (f"<RadialGrid r_max={self.r_max:g} blocks={len(self.blocks)} "
                f"nodes={self.size}>")

    def refined(self, factor: int = 2) -> RadialGrid:
        return RadialGrid(self.r_max, self.nodes_per_block * factor, self.origin_nodes * factor,
                          self.panel_width, self.m_min)

    def extended(self, factor: int = 2) -> RadialGrid:
        return RadialGrid(self.r_max * factor, self.nodes_per_block, self.origin_nodes,
                          self.panel_width, self.m_min)

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.concatenate([b.nodes for b in self.blocks])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.concatenate([b.weights for b in self.blocks])

    @cached_property
    def block_labels(self) -> np.ndarray:
        """Block index m of every node (ORIGIN for the origin panel)."""
        return np.concatenate([np.full(len(b.nodes), b.m) for b in self.blocks])

    @property
    def size(self) -> int:
        return len(self.nodes)

    def block(self, m: int) -> DyadicBlock:
        for b in self.blocks:
            if b.m == m:
                return b
        raise DomainError(f"block m={m} not in grid")


@dataclass
class RadialIntegral:
    """Composite value with per-block contributions and the geometric tail
    estimate beyond r_max (inf when the last blocks do not decay)."""

    value: float
    contributions: dict[int, float]
    tail: float

    @property
    def decays(self) -> bool:
        return math.isfinite(self.tail)


def _tail_estimate(contributions: dict[int, float]) -> float:
    dyadic = [c for m, c in contributions.items() if m != ORIGIN]
    if len(dyadic) < 2:
        return math.inf
    last, previous = dyadic[-1], dyadic[-2]
    if last == 0:
        return 0.0
    if previous == 0:
        return math.inf
    gamma = last / previous
    if gamma >= 1:
        return math.inf
    return last * gamma / (1 - gamma)


def radial_integral(values: np.ndarray, grid: RadialGrid) -> RadialIntegral:
    """Integrate samples at ``grid.nodes`` block by block."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size,):
        raise GridMismatchError(f"{values.shape} samples for a radial grid of {grid.size} nodes")

    weighted = values * grid.weights
    contributions = {}
    start = 0
    for b in grid.blocks:
        stop = start + len(b.nodes)
        contributions[b.m] = float(np.sum(weighted[start:stop]))
        start = stop

    tail = _tail_estimate(contributions)
    if not math.isfinite(tail):
        logger.debug("radial tail does not decay geometrically beyond r_max")
    return RadialIntegral(float(sum(contributions.values())), contributions, tail)


def _check_exponent(p: float):
    if not p >= 1 or not math.isfinite(p):
        raise DomainError(f"norm exponent must be finite and >= 1, got {p}")


@dataclass(frozen=True)
class NormEstimate:
    """A mixed norm over [0, r_max] with the geometric tail beyond r_max.

    ``tail`` is in units of the p-th power, like the block contributions;
    :attr:`upper` folds it back into the norm as an error bar.
    """

    value: float
    tail: float
    p: float

    def __float__(self) -> float:
        return self.value

    @property
    def decays(self) -> bool:
        return math.isfinite(self.tail)

    @property
    def upper(self) -> float:
        if not self.decays:
            return math.inf
        return (self.value ** self.p + self.tail) ** (1 / self.p)

    def row(self, prefix: str = "norm") -> dict[str, float]:
        return {prefix: self.value, f"{prefix}_tail": self.tail, f"{prefix}_upper": self.upper}


def _outer_norm(inner: np.ndarray, grid: RadialGrid, p: float, n: int) -> NormEstimate:
    """(int r^(n-1) inner^(p/2) dr)^(1/p) with inner the squared angular norm."""
    radial = radial_integral(grid.nodes ** (n - 1) * inner ** (p / 2), grid)
    if not radial.decays:
        logger.warning(f"L^{p:g} radial norm does not decay beyond r_max={grid.r_max:g}")
    return NormEstimate(radial.value ** (1 / p), radial.tail, p)


def mixed_norm_p2(f_coeffs, grid: RadialGrid, p: float, n: int = 2) -> NormEstimate:
    """L^p_rad L^2_ang norm from per-harmonic radial samples.

    ``f_coeffs`` has shape (H, grid.size), one row per harmonic, or
    (grid.size,) for a single channel. By angular Parseval the inner L^2 norm
    is the l^2 norm over harmonics.
    """
    _check_exponent(p)
    if grid.size == 0:
        raise EmptyConfigurationError("radial grid has no nodes")

    coeffs = np.atleast_2d(np.asarray(f_coeffs))
    if coeffs.shape[-1] != grid.size:
        raise GridMismatchError(f"{coeffs.shape[-1]} radial samples for {grid.size} nodes")

    inner = np.sum(np.abs(coeffs) ** 2, axis=0)
    return _outer_norm(inner, grid, p, n)


def mixed_norm_p22(samples, grid: RadialGrid, z_grid: ZGrid, quadrature: AngularQuadrature,
                   p: float) -> NormEstimate:
    """L^{p,2,2} norm of samples of shape (grid.size, z count, angular nodes).

    The inner L^2_z L^2_theta norm uses Simpson in z and the angular
    quadrature; the outer radial weight is r^(n-1) with n from the
    quadrature.
    """
    _check_exponent(p)
    if grid.size == 0:
        raise EmptyConfigurationError("radial grid has no nodes")

    samples = np.asarray(samples)
    expected = (grid.size, z_grid.count, quadrature.size)
    if samples.shape != expected:
        raise GridMismatchError(f"samples of shape {samples.shape}, expected {expected}")

    angular = np.abs(samples) ** 2 @ quadrature.weights
    inner = z_grid.simpson(angular, axis=-1)
    return _outer_norm(inner, grid, p, quadrature.n)


def mixed_norm_p22_coefficients(coefficients, grid: RadialGrid, zeta_step: float, p: float,
                                n: int = 2) -> RadialIntegral:
    """L^{p,2,2} norm from harmonic coefficients sampled on (rho, zeta).

    ``coefficients`` has shape (H, grid.size, N_zeta) on a uniform zeta grid
    of spacing ``zeta_step``; the zeta integral is a rectangle rule over the
    full grid. Returns the p-th power as a :class:`RadialIntegral` so block
    contributions stay available; the norm is ``value ** (1 / p)``.
    """
    _check_exponent(p)
    coefficients = np.asarray(coefficients)
    if coefficients.ndim != 3 or coefficients.shape[1] != grid.size:
        raise GridMismatchError(
            f"coefficients of shape {coefficients.shape} for a radial grid of {grid.size} nodes"
        )

    inner = np.sum(np.abs(coefficients) ** 2, axis=(0, 2)) * zeta_step
    radial = grid.nodes ** (n - 1) * inner ** (p / 2)
    return radial_integral(radial, grid)


class NormRole(str, enum.Enum):
    RESTRICTION_P = "restriction_p"
    EXTENSION_Q = "extension_q"


@dataclass(frozen=True)
class NormExponent:
    p: float
    role: NormRole = NormRole.EXTENSION_Q

    def __post_init__(self):
        _check_exponent(self.p)
        object.__setattr__(self, "role", NormRole(self.role))

    def threshold(self, n: int) -> float:
        """2n/(n+1) for restriction exponents, 2n/(n-1) for extension ones."""
        if n < 2:
            raise DomainError(f"dimension must be >= 2, got {n}")
        if self.role is NormRole.RESTRICTION_P:
            return 2 * n / (n + 1)
        return 2 * n / (n - 1)

    def admissible(self, n: int) -> bool:
        if self.role is NormRole.RESTRICTION_P:
            return self.p < self.threshold(n)
        return self.p > self.threshold(n)

    def dual(self) -> NormExponent:
        if self.p == 1:
            raise DomainError("p = 1 has no finite dual exponent")
        other = NormRole.EXTENSION_Q if self.role is NormRole.RESTRICTION_P else NormRole.RESTRICTION_P
        return NormExponent(self.p / (self.p - 1), other)
