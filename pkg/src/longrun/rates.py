"""Transforms from raw yield and CPI series to real interest rates.

The chain is: annual bond yields -> nominal log rates n(t) = ln(1 + beta);
per-period annualized CPI change rates -> ten-year forward-averaged
inflation i(t); real rate r(t) = n(t) - i(t).  Negative-rate statistics are
duration weighted so mixed-frequency series are not biased toward their
quarterly era.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import DataError
from .timeseries import QUARTERLY, Observation, TimeSeries, align, step_durations


@dataclass(frozen=True)
class RealRateSeries:
    """Real interest rates with the provenance of their inputs."""

    series: TimeSeries
    nominal_label: str = ""
    inflation_label: str = ""
    window_years: int = 10

    def values(self):
        return self.series.values()

    def __len__(self):
        return len(self.series)


@dataclass(frozen=True)
class NegativeRateStats:
    fraction_negative: float
    years_negative: float

    def __post_init__(self):
        if not 0.0 <= self.fraction_negative <= 1.0:
            raise DataError("fraction_negative outside [0, 1]")
        if self.years_negative < 0:
            raise DataError("years_negative negative")


def nominal_log_rate(beta_series: TimeSeries) -> TimeSeries:
    """Pointwise n = ln(1 + beta) for an annual-yield series."""
    values = beta_series.values()
    if any(b <= -1.0 for b in values):
        raise DataError("bond yield <= -100% cannot be log transformed")
    return beta_series.with_values(
        (math.log1p(b) for b in values),
        label=f"log({beta_series.label})" if beta_series.label else "nominal_log_rate",
    )


def forward_inflation(c_series: TimeSeries, window_years: int = 10) -> TimeSeries:
    """Forward moving average of ln(1 + C) over ``window_years``.

    The window covers ``window_years`` times the local observations-per-year
    (10 annual points or 40 quarterly points for the default).  Windows never
    straddle a change of frequency: near an internal annual/quarterly switch
    the window is truncated at the boundary and a warning is emitted.  At the
    right edge the output is simply shortened by one window.
    """
    if window_years < 1:
        raise DataError("window_years must be a positive integer")
    values = c_series.values()
    if any(c <= -1.0 for c in values):
        raise DataError("CPI change rate <= -100% cannot be log transformed")
    log_terms = [math.log1p(c) for c in values]

    deltas = step_durations(c_series).deltas
    n = len(values)
    # Segment the series into maximal runs of constant spacing; observation j
    # belongs to the segment of its outgoing step, the last observation to
    # the final segment.
    seg_end = [0] * n  # index of the last observation reachable without a frequency change
    seg_end[n - 1] = n - 1
    for j in range(n - 2, -1, -1):
        seg_end[j] = seg_end[j + 1] if j + 1 == n - 1 or deltas[j + 1] == deltas[j] else j + 1

    out = []
    truncated = 0
    for j in range(n - 1):
        per_year = 4 if deltas[j] == QUARTERLY else 1
        width = window_years * per_year
        last = j + width - 1
        if seg_end[j] < n - 1 and last > seg_end[j]:
            last = seg_end[j]  # truncate at the frequency boundary
            truncated += 1
        elif last > n - 1:
            break  # right edge: drop points without a full window
        window = log_terms[j : last + 1]
        out.append((c_series.observations[j].date, sum(window) / len(window)))

    if not out:
        raise DataError(
            f"series shorter than one {window_years}-year window"
        )
    if truncated:
        warnings.warn(
            f"{truncated} forward-inflation windows truncated at a frequency change",
            stacklevel=2,
        )
    return TimeSeries(
        tuple(Observation(date, value) for date, value in out),
        label=f"fwd_inflation({c_series.label})",
    )


def real_rate(n: TimeSeries, i: TimeSeries, window_years: int = 10) -> RealRateSeries:
    """Pointwise r = n - i on identical timestamps."""
    if n.dates != i.dates:
        raise DataError("nominal and inflation series are misaligned")
    r = n.with_values(
        (nv - iv for nv, iv in zip(n.values(), i.values())),
        label="real_rate",
    )
    return RealRateSeries(
        series=r,
        nominal_label=n.label,
        inflation_label=i.label,
        window_years=window_years,
    )


def build_real_rates(
    yields_series: TimeSeries, cpi_series: TimeSeries, window_years: int = 10
) -> RealRateSeries:
    """Full transform: log yields, forward-average inflation, align, subtract."""
    n = nominal_log_rate(yields_series)
    i = forward_inflation(cpi_series, window_years)
    n_al, i_al = align(n, i)
    return real_rate(n_al, i_al, window_years)


def negative_stats(r: RealRateSeries) -> NegativeRateStats:
    """Duration-weighted share of time spent below zero.

    Each observation is weighted by the duration of its outgoing step; the
    final observation only bounds the last step and carries no weight.
    """
    values = r.values()
    if len(values) < 2:
        raise DataError("need at least 2 observations for negative-rate stats")
    deltas = step_durations(r.series).deltas
    span = sum(deltas)
    weight_negative = sum(d for v, d in zip(values, deltas) if v < 0)
    fraction = weight_negative / span
    return NegativeRateStats(fraction_negative=fraction, years_negative=fraction * span)


def cpi_rates_from_index(levels: TimeSeries) -> TimeSeries:
    """Optional helper: annualized change rates from CPI index levels.

    C(t) = (P(t+1)/P(t))**(1/Δ) - 1, so quarterly index moves are annualized.
    Output is one observation shorter than the input.
    """
    values = levels.values()
    if any(p <= 0 for p in values):
        raise DataError("CPI index levels must be positive")
    deltas = step_durations(levels).deltas
    rates = [
        (b / a) ** (1.0 / d) - 1.0 for a, b, d in zip(values, values[1:], deltas)
    ]
    return TimeSeries(
        tuple(Observation(o.date, v) for o, v in zip(levels.observations[:-1], rates)),
        label=f"cpi_rates({levels.label})",
    )
