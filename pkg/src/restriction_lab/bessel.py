"""Bessel functions of the first kind for real order and the decay
envelopes used throughout the restriction estimates.

Evaluation is delegated to :func:`scipy.special.jv` / :func:`scipy.special.jvp`
(AMOS backend). :func:`bessel_series` is an independent mpmath power-series
oracle used by the verification suite.
"""
from __future__ import annotations

import enum
import logging
import math
import typing as t
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.special import jv, jvp

from .errors import DomainError, OrderRangeError
from .typing import RealOrArray

logger = logging.getLogger(__name__)

MAX_ORDER = 1.0e4

#: Slack allowed on the envelopes that are stated with constant 1.
ENVELOPE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class BesselOrder:
    nu: float

    def __post_init__(self):
        nu = float(self.nu)
        if not math.isfinite(nu) or nu < 0:
            raise DomainError(f"Bessel order must be finite and >= 0, got {self.nu!r}")
        if nu > MAX_ORDER:
            raise OrderRangeError(f"Bessel order {nu} above supported range {MAX_ORDER:g}")
        object.__setattr__(self, "nu", nu)

    @classmethod
    def coerce(cls, order: BesselOrder | float) -> BesselOrder:
        if isinstance(order, BesselOrder):
            return order
        return cls(order)


class Regime(str, enum.Enum):
    OSCILLATORY = "Oscillatory"
    EXPONENTIAL = "Exponential"
    TURNING_POINT_ABOVE = "TurningPointAbove"
    TURNING_POINT_BELOW = "TurningPointBelow"
    ORIGIN = "Origin"
    UNCLASSIFIED = "Unclassified"


#: Regimes whose envelope is checked with the strict constant 1.
STRICT_REGIMES = (Regime.TURNING_POINT_ABOVE, Regime.TURNING_POINT_BELOW)

MIN_SAMPLE_DENSITY = 64
ENVELOPE_MAX_ORDER = 200


@dataclass(frozen=True)
class RegimeBound:
    regime: Regime
    bound: float
    rho: float | None = None


def _check_argument(x: RealOrArray) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    if np.any(arr < 0):
        raise DomainError("Bessel argument must be >= 0")
    return arr


def _as_result(arr: np.ndarray, x: RealOrArray) -> RealOrArray:
    if np.ndim(x) == 0:
        return float(arr)
    return arr


def bessel_j(order: BesselOrder | float, x: RealOrArray) -> RealOrArray:
    """J_nu(x) for real nu >= 0 and x >= 0 (scalar or array)."""
    order = BesselOrder.coerce(order)
    arr = _check_argument(x)
    return _as_result(jv(order.nu, arr), x)


def bessel_j_prime(order: BesselOrder | float, x: RealOrArray) -> RealOrArray:
    """J'_nu(x), the derivative in the argument."""
    order = BesselOrder.coerce(order)
    arr = _check_argument(x)
    return _as_result(jvp(order.nu, arr, 1), x)


def bessel_series(order: BesselOrder | float, x: float, terms: int | None = None,
                  dps: int = 60) -> float:
    """Power series sum_m (-1)^m (x/2)^(2m+nu) / (m! Gamma(m+nu+1)).

    Summed in ``dps`` decimal digits so the cancellation between large
    alternating terms (x up to ~30) stays far below double precision. When
    ``terms`` is None the series runs until the terms drop below the working
    precision, capped at 400.
    """
    order = BesselOrder.coerce(order)
    if x < 0:
        raise DomainError("Bessel argument must be >= 0")

    with mpmath.workdps(dps):
        nu = mpmath.mpf(order.nu)
        half = mpmath.mpf(x) / 2
        if half == 0:
            return 1.0 if order.nu == 0 else 0.0

        term = half ** nu / mpmath.gamma(nu + 1)
        total = term
        limit = terms if terms is not None else 400
        eps = mpmath.mpf(10) ** (-dps + 5)

        for m in range(1, limit):
            term *= -(half * half) / (m * (m + nu))
            total += term
            if terms is None and abs(term) <= eps * abs(total) and m > half:
                break

        return float(total)


def recurrence_residual(order: BesselOrder | float, x: RealOrArray) -> RealOrArray:
    """|J_{nu-1}(x) + J_{nu+1}(x) - (2 nu / x) J_nu(x)| for nu >= 1, x > 0."""
    order = BesselOrder.coerce(order)
    arr = _check_argument(x)
    nu = order.nu
    residual = np.abs(jv(nu - 1, arr) + jv(nu + 1, arr) - (2 * nu / arr) * jv(nu, arr))
    return _as_result(residual, x)


def decay_bound(order: BesselOrder | float, x: float) -> RegimeBound:
    """Classify ``x`` into the envelope regime of order ``nu`` and return
    the envelope value.

    Priority when clauses overlap: Oscillatory, Exponential,
    TurningPointAbove, TurningPointBelow, Origin. Regimes 1-4 need nu >= 1.
    """
    order = BesselOrder.coerce(order)
    nu = order.nu
    r = float(x)
    if r < 0 or not math.isfinite(r):
        raise DomainError("Bessel argument must be finite and >= 0")

    if nu >= 1:
        if r >= 2 * nu:
            return RegimeBound(Regime.OSCILLATORY, r ** -0.5)

        if r <= nu / 2:
            return RegimeBound(Regime.EXPONENTIAL, 1 / nu)

        cube = nu ** (1 / 3)
        window = 1.5 * nu ** (2 / 3)
        rho = abs(r - nu) / cube

        if r >= nu and rho <= window:
            bound = math.inf if rho == 0 else 1 / (rho ** 0.25 * cube)
            return RegimeBound(Regime.TURNING_POINT_ABOVE, bound, rho)

        if r < nu and 1 <= rho <= window:
            return RegimeBound(Regime.TURNING_POINT_BELOW, 1 / (rho * cube), rho)

    if r <= min(1.0, nu):
        return RegimeBound(Regime.ORIGIN, r ** nu)

    return RegimeBound(Regime.UNCLASSIFIED, math.nan)


def _regime_window(nu: float, regime: Regime, density: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample points r and the envelope at r for one decay regime.

    Returns empty arrays when the clause has no admissible points for nu.
    """
    cube = nu ** (1 / 3)
    window = 1.5 * nu ** (2 / 3)

    if regime is Regime.OSCILLATORY:
        r = np.linspace(2 * nu, 2 * nu + 200, density)
        return r, r ** -0.5

    if regime is Regime.EXPONENTIAL:
        r = np.linspace(0, nu / 2, density + 1)[1:]
        return r, np.full_like(r, 1 / nu)

    if regime is Regime.TURNING_POINT_ABOVE:
        rho = np.linspace(0, window, density + 1)[1:]
        return nu + rho * cube, 1 / (rho ** 0.25 * cube)

    if regime is Regime.TURNING_POINT_BELOW:
        # r = nu - rho nu^(1/3) must stay positive
        top = min(window, nu ** (2 / 3) * (1 - 1e-9))
        if top < 1:
            return np.empty(0), np.empty(0)
        rho = np.linspace(1, top, density)
        return nu - rho * cube, 1 / (rho * cube)

    if regime is Regime.ORIGIN:
        r = np.linspace(0, min(1.0, nu), density + 1)[1:]
        return r, r ** nu

    raise DomainError(f"No sampling window for regime {regime}")


def decay_ratio_grid(order: BesselOrder | float, regime: Regime,
                     density: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """(r samples, |J_nu(r)| / envelope) on the sampling window of ``regime``."""
    order = BesselOrder.coerce(order)
    r, envelope = _regime_window(order.nu, regime, density)
    if r.size == 0:
        return r, r

    # r^nu underflows near the origin for large nu; J_nu underflows with it
    values = np.abs(jv(order.nu, r))
    ratio = np.zeros_like(values)
    np.divide(values, envelope, out=ratio, where=envelope > 0)
    ratio[(envelope == 0) & (values > 0)] = np.inf
    return r, ratio


@dataclass
class RegimeReport:
    regime: Regime
    nu: float
    worst_r: float
    max_ratio: float
    samples: int

    @property
    def limit(self) -> float:
        if self.regime in STRICT_REGIMES:
            return 1.0
        return 1.0 + ENVELOPE_TOLERANCE

    @property
    def ok(self) -> bool:
        return self.max_ratio <= self.limit


@dataclass
class DecayReport:
    rows: list[RegimeReport] = field(default_factory=list)
    skipped: list[float] = field(default_factory=list)
    sample_density: int = MIN_SAMPLE_DENSITY

    @property
    def ok(self) -> bool:
        return all(row.ok for row in self.rows)

    @property
    def violations(self) -> list[RegimeReport]:
        return [row for row in self.rows if not row.ok]

    def max_ratio(self, regime: Regime) -> float:
        ratios = [row.max_ratio for row in self.rows if row.regime is regime]
        return max(ratios) if ratios else 0.0

    def worst(self) -> RegimeReport | None:
        if not self.rows:
            return None
        return max(self.rows, key=lambda row: row.max_ratio)

    def csv_rows(self) -> t.Iterator[dict[str, t.Any]]:
        for row in self.rows:
            yield {
                "regime": row.regime.value,
                "nu": row.nu,
                "worst_r": row.worst_r,
                "max_ratio": row.max_ratio,
            }


ENVELOPE_REGIMES = (
    Regime.OSCILLATORY,
    Regime.EXPONENTIAL,
    Regime.TURNING_POINT_ABOVE,
    Regime.TURNING_POINT_BELOW,
    Regime.ORIGIN,
)


def verify_decay_envelope(nu_grid: t.Iterable[float], sample_density: int = 256,
                          regimes: t.Iterable[Regime] = ENVELOPE_REGIMES) -> DecayReport:
    """Sample |J_nu| / envelope on every clause window for every nu.

    The report is always produced; :attr:`DecayReport.ok` tells whether all
    envelopes held on the grid. Orders outside [1, 200] are skipped and
    listed in :attr:`DecayReport.skipped`; densities below 64 are raised to 64.
    """
    if sample_density < MIN_SAMPLE_DENSITY:
        logger.warning(f"sample_density {sample_density} raised to {MIN_SAMPLE_DENSITY}")
        sample_density = MIN_SAMPLE_DENSITY

    report = DecayReport(sample_density=sample_density)
    regimes = tuple(regimes)

    for nu in nu_grid:
        if not 1 <= nu <= ENVELOPE_MAX_ORDER:
            logger.warning(f"nu={nu} outside [1, {ENVELOPE_MAX_ORDER}] skipped")
            report.skipped.append(float(nu))
            continue

        for regime in regimes:
            r, ratio = decay_ratio_grid(nu, regime, sample_density)
            if r.size == 0:
                logger.debug(f"regime {regime.value} has no window at nu={nu}")
                continue

            worst = int(np.argmax(ratio))
            row = RegimeReport(regime, float(nu), float(r[worst]), float(ratio[worst]), int(r.size))
            report.rows.append(row)

            if not row.ok:
                logger.warning(
                    f"envelope {regime.value} violated at nu={nu}, r={row.worst_r}: "
                    f"ratio {row.max_ratio:.6g}"
                )

    return report
