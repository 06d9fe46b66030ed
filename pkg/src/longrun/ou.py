"""Closed-form analytics of the mean-reverting (Ornstein-Uhlenbeck) rate model.

The model is dr = -alpha (r - m) dt + k dw with m the reversion level
(1/year), alpha the reversion strength (1/year) and k^2 the squared noise
amplitude (1/year^3).  Everything here is exact in those parameters:

* stationary moments: mean m, variance k^2 / (2 alpha);
* autocorrelation K(lag) = (k^2 / 2 alpha) exp(-alpha lag);
* probability of a negative stationary rate, (1/2) erfc(mu / kappa), with
  the dimensionless pair mu = m / alpha, kappa = k / alpha^(3/2), plus its
  small- and large-ratio asymptotic expansions;
* the exact log discount
  ln D(t) = -(m - k^2/2a^2) t
            + (1/a) [m - r0 - (k^2/4a^2)(3 - e^{-at})] (1 - e^{-at}),
  whose asymptotic decay rate is the long-run discount rate
  r_inf = m - k^2 / (2 alpha^2) = alpha (mu - kappa^2 / 2);
* the four-region classification of (mu, kappa) and the discount-rate
  curves -ln D(t)/t with their min/max standard-error envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import erfc

from .errors import DataError

if TYPE_CHECKING:  # pragma: no cover
    from .estimation import OUFit

#: Floor applied to alpha and k^2 when standard-error corners would push
#: them non-positive.
PARAM_FLOOR = 1e-6

#: Default time grid for discount-rate curves: geometric, 0.25 to 500 years.
DEFAULT_GRID = (0.25, 500.0, 200)


@dataclass(frozen=True)
class OUParams:
    m: float
    alpha: float
    k2: float

    def __post_init__(self):
        if not math.isfinite(self.m):
            raise DataError("m must be finite")
        if not self.alpha > 0:
            raise DataError("alpha must be positive")
        if self.k2 < 0:
            raise DataError("k2 must be nonnegative")


@dataclass(frozen=True)
class Dimensionless:
    mu: float
    kappa: float

    def __post_init__(self):
        if self.kappa < 0:
            raise DataError("kappa must be nonnegative")


@dataclass(frozen=True)
class Regime:
    label: str  # R1 | R2 | R3 | R4 | boundary_zero_rate
    r_inf_sign: str  # positive | zero | negative


@dataclass(frozen=True)
class DiscountCurve:
    times: np.ndarray
    rate_central: np.ndarray
    rate_lo: np.ndarray | None = None
    rate_hi: np.ndarray | None = None
    r0: float = 0.01


def stationary_moments(p: OUParams) -> tuple[float, float]:
    """Long-term mean and variance (m, k^2 / 2 alpha)."""
    return p.m, p.k2 / (2.0 * p.alpha)


def autocorrelation(p: OUParams, lag: float) -> float:
    """Stationary autocovariance (k^2 / 2 alpha) exp(-alpha lag)."""
    if lag < 0:
        raise DataError("lag must be nonnegative")
    return p.k2 / (2.0 * p.alpha) * math.exp(-p.alpha * lag)


def dimensionless(p: OUParams) -> Dimensionless:
    """mu = m / alpha, kappa = sqrt(k^2) / alpha^(3/2)."""
    return Dimensionless(mu=p.m / p.alpha, kappa=math.sqrt(p.k2) / p.alpha**1.5)


def neg_prob(d: Dimensionless) -> float:
    """Stationary probability of a negative rate, (1/2) erfc(mu / kappa).

    kappa = 0 is degenerate: the stationary law collapses onto mu, so the
    convention is 0 for mu > 0, 1 for mu < 0 and 1/2 for mu = 0.
    """
    if d.kappa == 0.0:
        return 0.0 if d.mu > 0 else (1.0 if d.mu < 0 else 0.5)
    return 0.5 * float(erfc(d.mu / d.kappa))


def neg_prob_expansion(d: Dimensionless) -> tuple[float, str]:
    """Asymptotic expansions of :func:`neg_prob`.

    mu < kappa: 1/2 - (mu/kappa)/sqrt(pi), tagged "small-ratio".
    mu > kappa: (kappa / 2 sqrt(pi) mu) exp(-mu^2/kappa^2), tagged "large-ratio".
    At mu = kappa neither expansion applies; use the exact form instead.
    """
    if d.kappa <= 0:
        raise DataError("expansions require kappa > 0")
    x = d.mu / d.kappa
    if x == 1.0:
        raise DataError("mu = kappa: neither expansion applies, use exact neg_prob")
    if x < 1.0:
        return 0.5 - x / math.sqrt(math.pi), "small-ratio"
    return math.exp(-x * x) / (2.0 * math.sqrt(math.pi) * x), "large-ratio"


def log_discount(p: OUParams, r0: float, t):
    """Exact ln D(t); accepts a scalar or an array of horizons t >= 0."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DataError("t must be nonnegative")
    a = p.alpha
    decay = np.exp(-a * t_arr)
    value = -(p.m - p.k2 / (2.0 * a * a)) * t_arr + (1.0 / a) * (
        p.m - r0 - p.k2 / (4.0 * a * a) * (3.0 - decay)
    ) * (1.0 - decay)
    return float(value) if np.isscalar(t) else value


def long_run_rate(p: OUParams) -> float:
    """Asymptotic discount rate r_inf = m - k^2 / (2 alpha^2)."""
    return p.m - p.k2 / (2.0 * p.alpha * p.alpha)


def classify_regime(d: Dimensionless) -> Regime:
    """Place (mu, kappa) in the four-region phase plane.

    The r_inf sign boundary is mu = kappa^2 / 2; the frequent-negative-rates
    boundary is mu = kappa.  Points exactly on mu = kappa^2 / 2 are labelled
    ``boundary_zero_rate`` (the discount is asymptotically constant).
    """
    threshold = d.kappa * d.kappa / 2.0
    if d.mu == threshold:
        return Regime(label="boundary_zero_rate", r_inf_sign="zero")
    if d.mu > threshold:
        label = "R1" if d.mu >= d.kappa else "R2"
        return Regime(label=label, r_inf_sign="positive")
    label = "R4" if d.mu >= d.kappa else "R3"
    return Regime(label=label, r_inf_sign="negative")


def parse_grid(spec) -> np.ndarray:
    """Grid from a ``geometric:start:stop:n`` / ``linear:start:stop:n`` spec,
    an iterable of times, or the default geometric grid when ``spec`` is None."""
    if spec is None:
        start, stop, n = DEFAULT_GRID
        return np.geomspace(start, stop, n)
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) != 4 or parts[0] not in ("geometric", "linear"):
            raise DataError(f"bad grid spec {spec!r}")
        try:
            start, stop, n = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise DataError(f"bad grid spec {spec!r}") from exc
        if start <= 0 or stop <= start or n < 2:
            raise DataError(f"bad grid spec {spec!r}")
        return np.geomspace(start, stop, n) if parts[0] == "geometric" else np.linspace(start, stop, n)
    grid = np.asarray(spec, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DataError("grid must be strictly positive and increasing")
    return grid


def discount_rate_curve(p: OUParams, r0: float, grid=None) -> DiscountCurve:
    """Central curve -ln D(t) / t on a strictly positive time grid."""
    times = parse_grid(grid)
    return DiscountCurve(
        times=times, rate_central=-log_discount(p, r0, times) / times, r0=r0
    )


def discount_rate_envelope(fit: "OUFit", r0: float, grid=None) -> DiscountCurve:
    """Curve with pointwise min/max over the 27 +/- 1 sigma parameter corners.

    Each of m, alpha, k^2 takes its central, minus-sigma and plus-sigma value;
    alpha and k^2 corners are clamped at a small positive floor.  The central
    curve uses the point estimates.
    """
    for se in (fit.se_m, fit.se_alpha, fit.se_k2):
        if not math.isfinite(se) or se < 0:
            raise DataError("envelope requires finite nonnegative standard errors")
    times = parse_grid(grid)
    p = fit.params
    central = -log_discount(p, r0, times) / times

    rate_lo = np.copy(central)
    rate_hi = np.copy(central)
    for dm in (-fit.se_m, 0.0, fit.se_m):
        for da in (-fit.se_alpha, 0.0, fit.se_alpha):
            for dk in (-fit.se_k2, 0.0, fit.se_k2):
                alpha_c = p.alpha + da
                k2_c = p.k2 + dk
                # Clamp only corners pushed non-positive; an exact k^2 = 0
                # central value is legitimate and must stay put.
                if alpha_c <= 0:
                    alpha_c = PARAM_FLOOR
                if k2_c < 0 or (k2_c == 0 and dk < 0):
                    k2_c = PARAM_FLOOR
                corner = OUParams(m=p.m + dm, alpha=alpha_c, k2=k2_c)
                rate = -log_discount(corner, r0, times) / times
                np.minimum(rate_lo, rate, out=rate_lo)
                np.maximum(rate_hi, rate, out=rate_hi)
    return DiscountCurve(
        times=times, rate_central=central, rate_lo=rate_lo, rate_hi=rate_hi, r0=r0
    )
