"""Shifted positive-rate models and the two-level mean-reverting extension.

The square-root (Feller) and geometric (lognormal) models only admit
positive states, so they are applied to the shifted variable
y = r - r_min, where r_min < 0 is the minimum of the observed series; the
discount then factorizes as D(t) = exp(-r_min t) E[exp(-int y)].

The extension nests a second, slower mean-reverting process inside the
first: the reversion level m itself reverts to m0 with strength alpha0 and
noise k0, driven by an independent Wiener process, with alpha > alpha0 > 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .estimation import FellerFit, OUFit
from .ou import OUParams
from .rates import RealRateSeries
from .timeseries import TimeSeries

logger = logging.getLogger(__name__)

#: Positivity nudge applied to the exact-zero point of a shifted series.
SHIFT_EPSILON = 1e-8

#: Relative half-width of the tie band deciding the lognormal boundary regime.
REGIME_TIE_BAND = 1e-12

_EULER_GAMMA = 0.5772156649015328606


@dataclass(frozen=True)
class ShiftedSeries:
    """A strictly positive series y = r - r_min plus the shift used."""

    y: TimeSeries
    r_min: float


@dataclass(frozen=True)
class LognormalRegime:
    label: str  # constant | exponential | power_law


@dataclass(frozen=True)
class FellerLongRun:
    y_inf: float
    r_inf: float
    se: float


@dataclass(frozen=True)
class ExtOUParams:
    m0: float
    alpha: float
    k2: float
    alpha0: float
    k02: float

    def __post_init__(self):
        if not (self.alpha > self.alpha0 > 0):
            raise DataError("requires alpha > alpha0 > 0")
        if self.k2 < 0 or self.k02 < 0:
            raise DataError("noise amplitudes must be nonnegative")


def shift_series(r) -> ShiftedSeries:
    """Shift a rate series by its minimum so all values are positive.

    A series whose minimum is already nonnegative passes through with a
    zero shift.  The single exact-zero point created at the minimum is
    nudged up by SHIFT_EPSILON so the positive-state likelihoods stay
    defined.
    """
    ts = r.series if isinstance(r, RealRateSeries) else r
    values = ts.values()
    if not values:
        raise DataError("empty series")
    r_min = min(values)
    if r_min >= 0:
        return ShiftedSeries(y=ts, r_min=0.0)
    shifted = [v - r_min for v in values]
    nudged = sum(1 for v in shifted if v == 0.0)
    if nudged:
        logger.info(
            "shift_series: nudged %d zero point(s) by %g", nudged, SHIFT_EPSILON
        )
    shifted = [v if v > 0.0 else SHIFT_EPSILON for v in shifted]
    return ShiftedSeries(
        y=ts.with_values(shifted, label=f"shifted({ts.label})"), r_min=r_min
    )


def feller_long_run(f: FellerFit) -> FellerLongRun:
    """Long-run rate of the shifted square-root model.

    y_inf = 2 m / (1 + sqrt(1 + 2 k^2 / alpha^2)) and r_inf = r_min + y_inf.
    The standard error is the delta method with independent parameter
    errors; the shift r_min enters as a known constant.
    """
    if f.alpha <= 0:
        raise DataError("alpha must be positive")
    s = math.sqrt(1.0 + 2.0 * f.k2 / (f.alpha * f.alpha))
    y_inf = 2.0 * f.m / (1.0 + s)
    d_m = 2.0 / (1.0 + s)
    d_alpha = 4.0 * f.m * f.k2 / (s * f.alpha**3 * (1.0 + s) ** 2)
    d_k2 = -2.0 * f.m / (s * f.alpha * f.alpha * (1.0 + s) ** 2)
    se = math.sqrt(
        (d_m * f.se_m) ** 2 + (d_alpha * f.se_alpha) ** 2 + (d_k2 * f.se_k2) ** 2
    )
    return FellerLongRun(y_inf=y_inf, r_inf=f.r_min + y_inf, se=se)


def lognormal_regime(m_l: float, k2_l: float) -> LognormalRegime:
    """Asymptotic discount regime of the shifted geometric model.

    Decided by the sign of m - k^2/2: negative gives an asymptotically
    constant discount, positive an exponential decay, and the boundary
    (within a tiny relative tie band) the power-law t^(-1/2).
    """
    if k2_l <= 0:
        raise DataError("k2 must be positive")
    gap = m_l - k2_l / 2.0
    scale = max(abs(m_l), k2_l / 2.0)
    if abs(gap) <= REGIME_TIE_BAND * scale:
        return LognormalRegime("power_law")
    return LognormalRegime("exponential" if gap > 0 else "constant")


def digamma(x: float) -> float:
    """The digamma function psi(x) for x > 0, accurate to about 1e-12.

    Upward recurrence psi(x+1) = psi(x) + 1/x lifts the argument to >= 10,
    where the asymptotic series in inverse even powers applies.
    """
    if not x > 0:
        raise DataError("digamma requires x > 0")
    result = 0.0
    while x < 10.0:
        result -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = inv2 * (
        1.0 / 12.0
        - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0))))
    )
    return result + math.log(x) - 0.5 / x - series


def lognormal_long_run(m_l: float, k2_l: float) -> float:
    """Long-run decay rate y_inf of the geometric model, exponential regime only.

    y_inf = (m - k^2/2) / [psi(2m/k^2) + 1/(2m/k^2 - 1)].
    """
    if lognormal_regime(m_l, k2_l).label != "exponential":
        raise DataError("long-run rate only defined in the exponential regime (m > k^2/2)")
    ratio = 2.0 * m_l / k2_l
    return (m_l - k2_l / 2.0) / (digamma(ratio) + 1.0 / (ratio - 1.0))


def lognormal_mean(
    r0: float, r_min: float, m_l: float, t, shifted_state: bool = False
):
    """Expected rate under the shifted geometric model.

    The default follows the closed form as printed, (r0 + r_min) e^{m t}
    - r_min.  That is dimensionally consistent only if the initial shifted
    state is read as y0 = r0 + r_min, which conflicts with the definition
    y = r - r_min; pass ``shifted_state=True`` for the y0 = r0 - r_min
    reading, (r0 - r_min) e^{m t} + r_min.  The two agree at t = 0 and
    whenever r_min = 0.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DataError("t must be nonnegative")
    growth = np.exp(m_l * t_arr)
    if shifted_state:
        value = (r0 - r_min) * growth + r_min
    else:
        value = (r0 + r_min) * growth - r_min
    return float(value) if np.isscalar(t) else value


def ext_ou_variance(p: ExtOUParams) -> float:
    """Exact stationary variance of the two-level model.

    Var = k^2/(2 alpha) + alpha k0^2 / (2 alpha0 (alpha + alpha0)).
    This is the value the autocorrelation attains at lag zero and what long
    simulations converge to; the often-quoted k^2/(2 alpha) + k0^2/(2 alpha0)
    is its alpha >> alpha0 limit.
    """
    return p.k2 / (2.0 * p.alpha) + p.alpha * p.k02 / (
        2.0 * p.alpha0 * (p.alpha + p.alpha0)
    )


def ext_ou_autocorr(p: ExtOUParams, lag: float) -> float:
    """Stationary autocovariance of the two-level model.

    K(tau) = [k^2/2a - k0^2 a / 2(a^2 - a0^2)] e^{-a tau}
             + [k0^2 a^2 / 2(a^2 - a0^2) a0] e^{-a0 tau},
    a fast term decaying with alpha and a slow term decaying with alpha0.
    """
    if lag < 0:
        raise DataError("lag must be nonnegative")
    a, a0 = p.alpha, p.alpha0
    d = a * a - a0 * a0
    fast = (p.k2 / (2.0 * a) - p.k02 * a / (2.0 * d)) * math.exp(-a * lag)
    slow = (p.k02 * a * a / (2.0 * d * a0)) * math.exp(-a0 * lag)
    return fast + slow


def ext_long_run(p: ExtOUParams) -> float:
    """Long-run discount rate m0 - k^2/2a^2 - k0^2/2a0^2 of the extension.

    With k0^2 = 0 this reduces exactly to the single-level long-run rate;
    any slow noise strictly lowers it further.
    """
    return p.m0 - (
        p.k2 / (2.0 * p.alpha * p.alpha) + p.k02 / (2.0 * p.alpha0 * p.alpha0)
    )


def alpha0_sweep(fit, historical_variance: float, alpha0_grid) -> np.ndarray:
    """Long-run rate of the extension as a function of the slow reversion.

    The slow noise share is pinned to the historical variance through the
    wide-separation variance budget: k0^2 = 2 alpha0 (Var - k^2/2 alpha), so

        r_inf_ext(alpha0) = m - (1/2) [k^2/2 alpha^2
                                       + (Var - k^2/2 alpha) / alpha0].

    alpha0 itself is a scenario input, never estimated.  Returns the curve
    values on ``alpha0_grid``.
    """
    p = fit.params if isinstance(fit, OUFit) else fit
    if not isinstance(p, OUParams):
        raise DataError("expected an OUFit or OUParams")
    grid = np.asarray(alpha0_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or np.any(grid <= 0):
        raise DataError("alpha0 grid must be positive")
    if np.any(grid >= p.alpha):
        raise DataError("alpha0 grid must stay below the fast reversion alpha")
    fast_var = p.k2 / (2.0 * p.alpha)
    slow_share = historical_variance - fast_var
    if slow_share < 0:
        raise DataError(
            "historical variance below the fast component "
            f"(implied slow variance share {slow_share:.3g} < 0)"
        )
    return p.m - 0.5 * (p.k2 / (2.0 * p.alpha * p.alpha) + slow_share / grid)
