"""Maximum-likelihood calibration of the rate models.

Three estimators live here:

* :func:`fit_ou` — exact Gaussian transition likelihood of the
  mean-reverting model.  Uniformly spaced data admits closed-form
  estimators (the AR(1) regression); mixed annual/quarterly spacing is
  handled natively by a one-dimensional profile search over alpha with m
  and k^2 profiled out.
* :func:`fit_feller` — exact square-root-diffusion transition likelihood
  (noncentral chi-square density via the scaled modified Bessel function,
  stabilized in the log domain), initialized from conditional least
  squares.
* :func:`fit_lognormal` — closed-form MLE of the geometric model from log
  increments.

Standard errors come from the inverse observed Fisher information; for
uniformly spaced OU data the standard asymptotic forms are used directly.
:func:`propagate` pushes those errors through to the long-run rate and the
dimensionless parameters by the delta method.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gammaln, ive

from .errors import DataError, NumericalError
from .ou import OUParams, dimensionless, long_run_rate
from .rates import RealRateSeries
from .timeseries import TimeSeries, step_durations

#: Minimum / advisory sample sizes for fitting.
MIN_OBS = 30
ADVISORY_OBS = 100

#: One-step autoregression coefficient below which alpha is barely
#: identified (step longer than about two correlation times).
FAST_REVERSION_A = math.exp(-2.0)

_ALPHA_FLOOR = 1e-6


@dataclass(frozen=True)
class OUFit:
    params: OUParams
    se_m: float
    se_alpha: float
    se_k2: float
    n_obs: int
    loglik: float
    flags: tuple[str, ...] = ()
    method: str = "closed_form"

    def to_dict(self) -> dict:
        return {
            "model": "ou",
            "params": {"m": self.params.m, "alpha": self.params.alpha, "k2": self.params.k2},
            "se": {"m": self.se_m, "alpha": self.se_alpha, "k2": self.se_k2},
            "n_obs": self.n_obs,
            "loglik": self.loglik,
            "flags": list(self.flags),
            "method": self.method,
        }


@dataclass(frozen=True)
class DerivedQuantities:
    r_inf: float
    se_r_inf: float
    mu: float
    se_mu: float
    kappa: float
    se_kappa: float


@dataclass(frozen=True)
class FellerFit:
    m: float
    alpha: float
    k2: float
    se_m: float
    se_alpha: float
    se_k2: float
    r_min: float
    n_obs: int
    loglik: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "model": "feller",
            "params": {"m": self.m, "alpha": self.alpha, "k2": self.k2},
            "se": {"m": self.se_m, "alpha": self.se_alpha, "k2": self.se_k2},
            "r_min": self.r_min,
            "n_obs": self.n_obs,
            "loglik": self.loglik,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class LognormalFit:
    m: float
    k2: float
    se_m: float
    se_k2: float
    r_min: float
    n_obs: int
    loglik: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "model": "lognormal",
            "params": {"m": self.m, "k2": self.k2},
            "se": {"m": self.se_m, "k2": self.se_k2},
            "r_min": self.r_min,
            "n_obs": self.n_obs,
            "loglik": self.loglik,
            "flags": list(self.flags),
        }


def _extract(series, deltas=None) -> tuple[np.ndarray, np.ndarray]:
    """Values and per-step durations from any of the accepted input shapes."""
    if isinstance(series, RealRateSeries):
        series = series.series
    if isinstance(series, TimeSeries):
        values = np.asarray(series.values(), dtype=float)
        d = np.asarray(step_durations(series).deltas, dtype=float)
        return values, d
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise DataError("expected a one-dimensional series")
    if deltas is None:
        d = np.ones(len(values) - 1)
    else:
        d = np.asarray(deltas, dtype=float)
        if np.isscalar(deltas) or d.ndim == 0:
            d = np.full(len(values) - 1, float(deltas))
    if len(d) != len(values) - 1:
        raise DataError("deltas length must be len(values) - 1")
    if np.any(d <= 0):
        raise DataError("step durations must be positive")
    return values, d


def _ou_negloglik(values: np.ndarray, deltas: np.ndarray, m: float, alpha: float, k2: float) -> float:
    """Exact negative Gaussian transition log likelihood."""
    if alpha <= 0 or k2 <= 0:
        return math.inf
    x, y = values[:-1], values[1:]
    a = np.exp(-alpha * deltas)
    var = k2 * (1.0 - a * a) / (2.0 * alpha)
    e = y - m - a * (x - m)
    return 0.5 * float(np.sum(np.log(2.0 * math.pi * var) + e * e / var))


def _ou_profile(values: np.ndarray, deltas: np.ndarray, alpha: float) -> tuple[float, float, float]:
    """Profile m and k^2 out of the likelihood at fixed alpha.

    Returns (m_hat, k2_hat, negative profile log likelihood).
    """
    x, y = values[:-1], values[1:]
    n = len(x)
    a = np.exp(-alpha * deltas)
    v = (1.0 - a * a) / (2.0 * alpha)
    w = (1.0 - a) / v
    m_hat = float(np.sum((y - a * x) * w) / np.sum((1.0 - a) * w))
    e = y - m_hat - a * (x - m_hat)
    k2_hat = float(np.mean(e * e / v))
    if k2_hat <= 0:
        return m_hat, k2_hat, math.inf
    nll = 0.5 * (n * math.log(2.0 * math.pi * k2_hat) + float(np.sum(np.log(v))) + n)
    return m_hat, k2_hat, nll


def _ou_profile_score(values: np.ndarray, deltas: np.ndarray, alpha: float) -> float:
    """Analytic d/d(alpha) of the profile negative log likelihood.

    With m and k^2 profiled out, the m-derivative vanishes at the weighted
    least-squares optimum (envelope theorem), leaving only the explicit
    alpha dependence through a_i = exp(-alpha * delta_i) and the step
    variances v_i = (1 - a_i^2) / (2 alpha).
    """
    m_hat, k2_hat, _ = _ou_profile(values, deltas, alpha)
    x, y = values[:-1], values[1:]
    n = len(x)
    a = np.exp(-alpha * deltas)
    v = (1.0 - a * a) / (2.0 * alpha)
    e = y - m_hat - a * (x - m_hat)
    da = -deltas * a
    dv = (deltas * a * a) / alpha - v / alpha
    de = -da * (x - m_hat)
    dk2 = float(np.mean((2.0 * e * de - e * e * dv / v) / v))
    return 0.5 * (n * dk2 / k2_hat + float(np.sum(dv / v)))


def _polish_alpha(values, deltas, alpha: float, lo: float, hi: float) -> float:
    """Refine the profile-likelihood optimum by a secant root-find on the
    analytic score.

    The likelihood itself is flat to machine precision within ~1e-8 of the
    optimum, so the bracketing search alone cannot resolve alpha finer than
    that; the score still changes sign sharply and localizes the root to
    machine precision.
    """
    a0 = alpha
    a1 = alpha * (1.0 + 1e-6)
    g0 = _ou_profile_score(values, deltas, a0)
    g1 = _ou_profile_score(values, deltas, a1)
    best = alpha
    for _ in range(80):
        if g1 == g0 or not (math.isfinite(g0) and math.isfinite(g1)):
            break
        a2 = a1 - g1 * (a1 - a0) / (g1 - g0)
        if not (lo < a2 < hi):
            break
        a0, g0 = a1, g1
        a1, g1 = a2, _ou_profile_score(values, deltas, a2)
        best = a1
        if abs(a1 - a0) <= 1e-14 * a1:
            break
    if _ou_profile(values, deltas, best)[2] <= _ou_profile(values, deltas, alpha)[2] + 1e-9:
        return best
    return alpha


def _hessian(f, theta: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with per-coordinate relative steps."""
    n = len(theta)
    h = rel_step * np.maximum(np.abs(theta), 1e-8)
    hess = np.empty((n, n))
    f0 = f(theta)
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h[i]
            ej[j] = h[j]
            if i == j:
                val = (f(theta + ei) - 2.0 * f0 + f(theta - ei)) / (h[i] * h[i])
            else:
                val = (
                    f(theta + ei + ej)
                    - f(theta + ei - ej)
                    - f(theta - ei + ej)
                    + f(theta - ei - ej)
                ) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess


def _se_from_hessian(f, theta: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Standard errors from the inverse observed Fisher information."""
    flags: list[str] = []
    hess = _hessian(f, theta)
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(hess)
        flags.append("singular_information")
    diag = np.diag(cov).copy()
    if np.any(diag < 0):
        flags.append("se_unreliable")
        diag = np.abs(diag)
    return np.sqrt(diag), flags


def fit_ou(series, deltas=None, force_numerical: bool = False) -> OUFit:
    """Fit the mean-reverting model by exact maximum likelihood.

    ``series`` may be a RealRateSeries, a gap-free TimeSeries, or a plain
    array (then ``deltas`` supplies the per-step spacing, scalar or vector;
    default 1.0).  When the one-step autoregression coefficient falls
    outside (0, 1) the fit is flagged rather than aborted, since barely
    detectable mean reversion is an expected outcome on real data.
    """
    values, d = _extract(series, deltas)
    n = len(values) - 1
    if n + 1 < MIN_OBS:
        raise DataError(f"need at least {MIN_OBS} observations, got {n + 1}")
    if n + 1 < ADVISORY_OBS:
        warnings.warn(
            f"only {n + 1} observations; OU estimates will be noisy", stacklevel=2
        )
    if np.ptp(values) == 0.0:
        raise NumericalError("degenerate variance: series is constant")

    flags: list[str] = []
    uniform = np.all(d == d[0])
    mean_delta = float(np.mean(d))

    a_hat = math.nan
    if uniform and not force_numerical:
        x, y = values[:-1], values[1:]
        sx, sy = float(np.sum(x)), float(np.sum(y))
        sxx, sxy = float(np.sum(x * x)), float(np.sum(x * y))
        denom = n * sxx - sx * sx
        if denom == 0.0:
            raise NumericalError("degenerate variance: zero sample dispersion")
        a_hat = (n * sxy - sx * sy) / denom

    if uniform and not force_numerical and 0.0 < a_hat < 1.0:
        delta = float(d[0])
        alpha = -math.log(a_hat) / delta
        m = (float(np.sum(values[1:])) - a_hat * float(np.sum(values[:-1]))) / (
            n * (1.0 - a_hat)
        )
        e = values[1:] - m - a_hat * (values[:-1] - m)
        sig2_eps = float(np.mean(e * e))
        if sig2_eps == 0.0:
            raise NumericalError("degenerate variance: perfect one-step fit")
        k2 = 2.0 * alpha * sig2_eps / (1.0 - a_hat * a_hat)
        se_alpha = math.sqrt((math.exp(2.0 * alpha * delta) - 1.0) / (n * delta * delta))
        se_m = math.sqrt(k2 / (2.0 * alpha) * (1.0 + a_hat) / (n * (1.0 - a_hat)))
        se_k2 = math.sqrt(2.0 / n) * k2
        if a_hat < FAST_REVERSION_A:
            flags.append("fast_reversion")
        loglik = -_ou_negloglik(values, d, m, alpha, k2)
        return OUFit(
            params=OUParams(m=m, alpha=alpha, k2=k2),
            se_m=se_m,
            se_alpha=se_alpha,
            se_k2=se_k2,
            n_obs=n + 1,
            loglik=loglik,
            flags=tuple(flags),
            method="closed_form",
        )

    if uniform and not force_numerical:
        # No mean reversion detectable from the regression coefficient;
        # fall through to the bounded search and flag the result.
        flags.append("no_mean_reversion")

    lo, hi = _ALPHA_FLOOR, 20.0 / mean_delta
    res = minimize_scalar(
        lambda alpha: _ou_profile(values, d, alpha)[2],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    alpha = _polish_alpha(values, d, float(res.x), lo, hi)
    m, k2, nll = _ou_profile(values, d, alpha)
    if not math.isfinite(nll):
        raise NumericalError("degenerate variance in profile likelihood")
    if alpha >= hi * (1.0 - 1e-6) and "no_mean_reversion" not in flags:
        flags.append("fast_reversion")
    if math.exp(-alpha * mean_delta) < FAST_REVERSION_A and "fast_reversion" not in flags:
        flags.append("fast_reversion")

    se, hess_flags = _se_from_hessian(
        lambda th: _ou_negloglik(values, d, th[0], th[1], th[2]),
        np.array([m, alpha, k2]),
    )
    flags.extend(hess_flags)
    return OUFit(
        params=OUParams(m=m, alpha=alpha, k2=k2),
        se_m=float(se[0]),
        se_alpha=float(se[1]),
        se_k2=float(se[2]),
        n_obs=n + 1,
        loglik=-nll,
        flags=tuple(flags),
        method="profile_search",
    )


def propagate(fit: OUFit, cov: np.ndarray | None = None) -> DerivedQuantities:
    """Delta-method errors for r_inf, mu and kappa.

    By default the parameter errors are treated as independent (only
    marginal standard deviations are available from the fit); pass a 3x3
    covariance matrix in (m, alpha, k2) order for the full-covariance
    variant.  At k^2 = 0 the kappa gradient is singular: se(kappa) is then
    0 when se(k^2) = 0 and infinite otherwise.
    """
    p = fit.params
    m, alpha, k2 = p.m, p.alpha, p.k2
    k = math.sqrt(k2)

    grad_rinf = np.array([1.0, k2 / alpha**3, -1.0 / (2.0 * alpha * alpha)])
    grad_mu = np.array([1.0 / alpha, -m / (alpha * alpha), 0.0])
    if k > 0:
        grad_kappa = np.array(
            [0.0, -1.5 * k / alpha**2.5, 1.0 / (2.0 * k * alpha**1.5)]
        )
    else:
        grad_kappa = None

    if cov is not None:
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (3, 3):
            raise DataError("covariance must be 3x3 in (m, alpha, k2) order")
        var = lambda g: float(g @ cov @ g)
    else:
        se2 = np.array([fit.se_m, fit.se_alpha, fit.se_k2]) ** 2
        var = lambda g: float(np.sum(g * g * se2))

    if grad_kappa is not None:
        se_kappa = math.sqrt(var(grad_kappa))
    else:
        se_kappa = 0.0 if fit.se_k2 == 0 else math.inf

    d = dimensionless(p)
    return DerivedQuantities(
        r_inf=long_run_rate(p),
        se_r_inf=math.sqrt(var(grad_rinf)),
        mu=d.mu,
        se_mu=math.sqrt(var(grad_mu)),
        kappa=d.kappa,
        se_kappa=se_kappa,
    )


def _log_bessel_i(order: float, z: np.ndarray) -> np.ndarray:
    """log I_order(z), stable for large z via the scaled Bessel function.

    Where the scaled value underflows (small z with large order) the leading
    power-series term is used instead.
    """
    z = np.asarray(z, dtype=float)
    scaled = ive(order, z)
    with np.errstate(divide="ignore"):
        out = np.where(scaled > 0.0, np.log(np.where(scaled > 0.0, scaled, 1.0)) + z, -np.inf)
    bad = ~(scaled > 0.0)
    if np.any(bad):
        zb = np.where(z[bad] > 0, z[bad], np.finfo(float).tiny)
        out = np.array(out)
        out[bad] = order * np.log(zb / 2.0) - gammaln(order + 1.0)
    return out


def feller_transition_logpdf(
    y0: np.ndarray, y1: np.ndarray, deltas: np.ndarray, m: float, alpha: float, k2: float
) -> np.ndarray:
    """Exact transition log density of dy = -alpha (y - m) dt + sqrt(k2 y) dw."""
    a = np.exp(-alpha * deltas)
    c = 2.0 * alpha / (k2 * (1.0 - a))
    q = 2.0 * alpha * m / k2 - 1.0
    u = c * y0 * a
    v = c * y1
    return (
        np.log(c)
        - u
        - v
        + 0.5 * q * (np.log(v) - np.log(u))
        + _log_bessel_i(q, 2.0 * np.sqrt(u * v))
    )


def _feller_negloglik(values, deltas, m, alpha, k2) -> float:
    if m <= 0 or alpha <= 0 or k2 <= 0:
        return math.inf
    ll = feller_transition_logpdf(values[:-1], values[1:], deltas, m, alpha, k2)
    total = float(np.sum(ll))
    return -total if math.isfinite(total) else math.inf


def fit_feller(series, deltas=None) -> FellerFit:
    """Fit the square-root diffusion to a strictly positive (shifted) series.

    Accepts the same input shapes as :func:`fit_ou`, or an
    ``altmodels.ShiftedSeries``.  Feller-condition violations
    (2 alpha m < k^2) are flagged, not fatal.
    """
    r_min = 0.0
    if hasattr(series, "r_min") and hasattr(series, "y"):  # ShiftedSeries
        r_min = series.r_min
        series = series.y
    values, d = _extract(series, deltas)
    if np.any(values <= 0):
        raise DataError("Feller fit requires strictly positive values")
    n = len(values) - 1
    if n + 1 < MIN_OBS:
        raise DataError(f"need at least {MIN_OBS} observations, got {n + 1}")
    if np.ptp(values) == 0.0:
        raise NumericalError("degenerate variance: series is constant")

    # Conditional-least-squares start from the Gaussian AR(1) regression.
    x, y = values[:-1], values[1:]
    mean_delta = float(np.mean(d))
    a0 = float(np.cov(x, y, bias=True)[0, 1] / np.var(x))
    a0 = min(max(a0, 1e-3), 1.0 - 1e-3)
    alpha0 = -math.log(a0) / mean_delta
    m0 = float(np.mean(values))
    e = y - m0 - a0 * (x - m0)
    k2_0 = 2.0 * alpha0 * float(np.mean(e * e)) / ((1.0 - a0 * a0) * m0)
    k2_0 = max(k2_0, 1e-12)

    def nll_log(theta):
        return _feller_negloglik(values, d, *np.exp(theta))

    res = minimize(
        nll_log,
        np.log([m0, alpha0, k2_0]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000},
    )
    if not res.success:
        raise NumericalError(f"Feller likelihood optimization failed: {res.message}")
    m, alpha, k2 = np.exp(res.x)

    flags: list[str] = []
    if 2.0 * alpha * m < k2:
        flags.append("feller_condition_violated")
    se, hess_flags = _se_from_hessian(
        lambda th: _feller_negloglik(values, d, th[0], th[1], th[2]),
        np.array([m, alpha, k2]),
    )
    flags.extend(hess_flags)
    return FellerFit(
        m=float(m),
        alpha=float(alpha),
        k2=float(k2),
        se_m=float(se[0]),
        se_alpha=float(se[1]),
        se_k2=float(se[2]),
        r_min=r_min,
        n_obs=n + 1,
        loglik=-float(res.fun),
        flags=tuple(flags),
    )


def fit_lognormal(series, deltas=None) -> LognormalFit:
    """Closed-form MLE of the geometric model on a positive (shifted) series.

    Log increments x_i = ln(y_{i+1}/y_i) are Normal((m - k^2/2) delta_i,
    k^2 delta_i); the drift and variance estimators are in closed form and
    the standard errors follow from the Fisher information.
    """
    r_min = 0.0
    if hasattr(series, "r_min") and hasattr(series, "y"):  # ShiftedSeries
        r_min = series.r_min
        series = series.y
    values, d = _extract(series, deltas)
    if np.any(values <= 0):
        raise DataError("lognormal fit requires strictly positive values")
    n = len(values) - 1
    if n + 1 < MIN_OBS:
        raise DataError(f"need at least {MIN_OBS} observations, got {n + 1}")

    x = np.log(values[1:] / values[:-1])
    total_time = float(np.sum(d))
    b = float(np.sum(x)) / total_time  # drift of the log process, m - k^2/2
    resid = x - b * d
    k2 = float(np.mean(resid * resid / d))
    m = b + k2 / 2.0

    flags: list[str] = []
    se_k2 = math.sqrt(2.0 / n) * k2
    se_m = math.sqrt(k2 / total_time + se_k2 * se_k2 / 4.0)
    # zero to working precision: residual variance negligible against the
    # raw second moment of the log increments
    scale = float(np.mean(x * x)) / float(np.mean(d))
    if k2 <= 1e-16 * max(scale, 1e-300):
        flags.append("zero_variance")
        loglik = math.inf
    else:
        var = k2 * d
        loglik = -0.5 * float(np.sum(np.log(2.0 * math.pi * var) + resid * resid / var))
    return LognormalFit(
        m=m,
        k2=k2,
        se_m=se_m,
        se_k2=se_k2,
        r_min=r_min,
        n_obs=n + 1,
        loglik=loglik,
        flags=tuple(flags),
    )


def ou_fit_from_dict(payload: dict) -> OUFit:
    p = payload["params"]
    se = payload.get("se", {})
    return OUFit(
        params=OUParams(m=p["m"], alpha=p["alpha"], k2=p["k2"]),
        se_m=se.get("m", 0.0),
        se_alpha=se.get("alpha", 0.0),
        se_k2=se.get("k2", 0.0),
        n_obs=payload.get("n_obs", 0),
        loglik=payload.get("loglik", math.nan),
        flags=tuple(payload.get("flags", ())),
        method=payload.get("method", "closed_form"),
    )
