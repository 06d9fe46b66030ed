"""Loading, validation, gap filling and alignment of historical rate series.

Series are sequences of (date, value) observations at annual or quarterly
spacing, possibly switching from annual to quarterly partway through
(several of the long bond-yield histories do exactly that).  Gaps are
observations whose value is absent; they are carried forward explicitly by
:func:`fill_gaps`, never encoded as sentinel numbers.

Timestamps are reduced to fractional years with quarters fixed at exactly
0.25 (no day-count convention), which keeps the AR(1) discretization of the
estimators clean.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
from dataclasses import dataclass, field, replace

from .errors import DataError

# End-of-quarter calendar dates for YYYYQn codes.
_QUARTER_END = {1: (3, 31), 2: (6, 30), 3: (9, 30), 4: (12, 31)}

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")

#: Spacings (in years) the pipeline accepts.
ANNUAL = 1.0
QUARTERLY = 0.25

_SPACING_TOL = 1e-9


def parse_date(token: str) -> dt.date:
    """Parse an ISO date ``YYYY-MM-DD`` or a quarter code ``YYYYQn``."""
    token = token.strip()
    m = _QUARTER_RE.match(token)
    if m:
        year, quarter = int(m.group(1)), int(m.group(2))
        month, day = _QUARTER_END[quarter]
        return dt.date(year, month, day)
    try:
        return dt.date.fromisoformat(token)
    except ValueError as exc:
        raise DataError(f"unparseable date {token!r}") from exc


def time_in_years(d: dt.date) -> float:
    """Map a calendar date to fractional years at month resolution.

    Month fractions are multiples of 1/12; differences between end-of-period
    dates therefore come out as exact multiples of 0.25.
    """
    return d.year + (d.month - 1) / 12.0


@dataclass(frozen=True)
class Observation:
    date: dt.date
    value: float | None  # None marks a gap

    def __post_init__(self):
        if self.value is not None and not _is_finite(self.value):
            raise DataError(f"non-finite value at {self.date}")


def _is_finite(x: float) -> bool:
    return x == x and abs(x) != float("inf")


@dataclass(frozen=True)
class TimeSeries:
    """An ordered, duplicate-free series of observations.

    ``declared_frequency`` is one of ``annual``, ``quarterly`` or ``mixed``
    and is validated against the actual spacing.  ``n_filled`` records how
    many gaps were carried forward, so downstream reports can disclose it.
    """

    observations: tuple[Observation, ...]
    label: str = ""
    declared_frequency: str = field(default="")
    n_filled: int = 0

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        for a, b in zip(obs, obs[1:]):
            if b.date <= a.date:
                raise DataError("non-monotone dates")
        freq = self.declared_frequency or _infer_frequency(obs)
        _validate_frequency(obs, freq)
        object.__setattr__(self, "declared_frequency", freq)

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def dates(self) -> tuple[dt.date, ...]:
        return tuple(o.date for o in self.observations)

    @property
    def times(self) -> tuple[float, ...]:
        """Observation times in fractional years."""
        return tuple(time_in_years(o.date) for o in self.observations)

    @property
    def has_gaps(self) -> bool:
        return any(o.value is None for o in self.observations)

    def values(self) -> tuple[float, ...]:
        """Values of a gap-free series; raises if any gap remains."""
        if self.has_gaps:
            raise DataError(f"series {self.label!r} still contains gaps")
        return tuple(o.value for o in self.observations)  # type: ignore[misc]

    def span_years(self) -> float:
        return time_in_years(self.observations[-1].date) - time_in_years(
            self.observations[0].date
        )

    def with_values(self, values, label: str | None = None) -> "TimeSeries":
        """Same timestamps, new values (used by pointwise transforms)."""
        vals = list(values)
        if len(vals) != len(self.observations):
            raise DataError("value count does not match timestamps")
        return TimeSeries(
            tuple(Observation(o.date, float(v)) for o, v in zip(self.observations, vals)),
            label=self.label if label is None else label,
            declared_frequency=self.declared_frequency,
            n_filled=self.n_filled,
        )


def _spacings(obs: tuple[Observation, ...]) -> list[float]:
    t = [time_in_years(o.date) for o in obs]
    return [b - a for a, b in zip(t, t[1:])]


def _classify_spacing(delta: float) -> float:
    for canonical in (QUARTERLY, ANNUAL):
        if abs(delta - canonical) <= _SPACING_TOL:
            return canonical
    raise DataError(f"unsupported spacing {delta:.6g} years (expected 0.25 or 1.0)")


def _infer_frequency(obs: tuple[Observation, ...]) -> str:
    deltas = {_classify_spacing(d) for d in _spacings(obs)}
    if deltas <= {ANNUAL}:
        return "annual"
    if deltas <= {QUARTERLY}:
        return "quarterly"
    return "mixed"


def _validate_frequency(obs: tuple[Observation, ...], freq: str) -> None:
    deltas = {_classify_spacing(d) for d in _spacings(obs)}
    if freq == "annual" and not deltas <= {ANNUAL}:
        raise DataError("declared annual but spacing is not constant 1.0")
    if freq == "quarterly" and not deltas <= {QUARTERLY}:
        raise DataError("declared quarterly but spacing is not constant 0.25")
    if freq == "mixed" and not deltas <= {QUARTERLY, ANNUAL}:
        raise DataError("mixed series may only mix 0.25 and 1.0 year spacing")
    if freq not in ("annual", "quarterly", "mixed"):
        raise DataError(f"unknown frequency {freq!r}")


@dataclass(frozen=True)
class StepDurations:
    """Per-step spacings in years; length is one less than the series."""

    deltas: tuple[float, ...]

    def __post_init__(self):
        if any(d <= 0 for d in self.deltas):
            raise DataError("non-positive step duration")

    @property
    def uniform(self) -> bool:
        return len(set(self.deltas)) <= 1

    def total(self) -> float:
        return sum(self.deltas)


def load_csv(path, label: str = "") -> TimeSeries:
    """Load ``date,value`` rows (ISO dates or YYYYQn codes, header optional).

    Lines starting with ``#`` are comments.  Rows with an empty value cell
    become gaps.  Requires at least two non-gap observations.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [
                row
                for row in csv.reader(fh)
                if row
                and any(c.strip() for c in row)
                and not row[0].lstrip().startswith("#")
            ]
    except OSError as exc:
        raise DataError(f"unreadable file {path}: {exc}") from exc

    if rows and not _looks_like_date(rows[0][0]):
        rows = rows[1:]  # header row

    observations = []
    for row in rows:
        if len(row) < 2:
            raise DataError(f"malformed row {row!r} in {path}")
        date = parse_date(row[0])
        cell = row[1].strip()
        if cell == "":
            observations.append(Observation(date, None))
            continue
        try:
            value = float(cell)
        except ValueError as exc:
            raise DataError(f"unparseable value {cell!r} at {date}") from exc
        observations.append(Observation(date, value))

    if sum(1 for o in observations if o.value is not None) < 2:
        raise DataError(f"fewer than 2 valid observations in {path}")
    return TimeSeries(tuple(observations), label=label or str(path))


def _looks_like_date(token: str) -> bool:
    try:
        parse_date(token)
        return True
    except DataError:
        return False


def fill_gaps(ts: TimeSeries) -> TimeSeries:
    """Carry the most recent prior value forward into every gap."""
    if ts.observations[0].value is None:
        raise DataError("leading gap: no prior value to repeat")
    if not ts.has_gaps:
        return ts
    out = []
    filled = 0
    last = ts.observations[0].value
    for o in ts.observations:
        if o.value is None:
            out.append(Observation(o.date, last))
            filled += 1
        else:
            last = o.value
            out.append(o)
    return replace(ts, observations=tuple(out), n_filled=ts.n_filled + filled)


def step_durations(ts: TimeSeries) -> StepDurations:
    """Per-step Δ in years (quarter = 0.25, year = 1.0 exactly)."""
    if len(ts) < 2:
        raise DataError("need at least 2 observations for step durations")
    return StepDurations(tuple(_classify_spacing(d) for d in _spacings(ts.observations)))


def align(a: TimeSeries, b: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    """Restrict both gap-free series to their common timestamps."""
    if a.has_gaps or b.has_gaps:
        raise DataError("align requires gap-free series (run fill_gaps first)")
    common = set(a.dates) & set(b.dates)
    if not common:
        raise DataError("empty intersection of timestamps")
    obs_a = tuple(o for o in a.observations if o.date in common)
    obs_b = tuple(o for o in b.observations if o.date in common)
    return (
        replace(a, observations=obs_a, declared_frequency=""),
        replace(b, observations=obs_b, declared_frequency=""),
    )
