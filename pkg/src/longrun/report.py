"""Per-country pipelines and table/curve emission.

A manifest (JSON list of ``{label, yields_path, cpi_path}`` objects) drives
the batch: each country is ingested, transformed to real rates, fitted,
propagated and classified independently, with failures isolated per
country.  Output tables mirror the canonical shapes: negative-rate
statistics, fitted parameters with the long-run rate, the dimensionless
pair, the model comparison, and optional discount-rate curve CSVs.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import altmodels, estimation, ou, rates, timeseries
from .errors import DataError

SCHEMA_VERSION = 1


@dataclass
class ReportOptions:
    window_years: int = 10
    r0: float = 0.01
    grid: str | None = None
    curves: bool = False
    envelope: bool = False
    alt_models: bool = False
    threads: int = 1


@dataclass
class CountryReport:
    label: str
    error: str | None = None
    n_filled: int = 0
    negative_stats: rates.NegativeRateStats | None = None
    ou_fit: estimation.OUFit | None = None
    derived: estimation.DerivedQuantities | None = None
    regime: ou.Regime | None = None
    feller_fit: estimation.FellerFit | None = None
    feller_long_run: altmodels.FellerLongRun | None = None
    lognormal_fit: estimation.LognormalFit | None = None
    lognormal_regime: altmodels.LognormalRegime | None = None
    curve: ou.DiscountCurve | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class Aggregate:
    group: str  # all | stable | unstable
    n: int
    mean_m: float
    mean_alpha: float
    mean_k2: float
    mean_r_inf: float
    dispersion_r_inf: float  # cross-sectional sample SD of r_inf


def load_manifest(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if isinstance(entries, dict):
        entries = entries.get("countries", [entries])
    if not isinstance(entries, list):
        raise DataError("manifest must be a JSON list of country objects")
    for entry in entries:
        for key in ("label", "yields_path", "cpi_path"):
            if key not in entry:
                raise DataError(f"manifest entry missing {key!r}")
    return entries


def run_country(entry: dict, options: ReportOptions, base_dir: Path | None = None) -> CountryReport:
    """Full pipeline for one country; any failure lands in ``report.error``."""
    label = entry["label"]
    report = CountryReport(label=label)
    base = Path(base_dir) if base_dir else Path(".")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            yields = timeseries.fill_gaps(
                timeseries.load_csv(base / entry["yields_path"], label=f"{label} yields")
            )
            cpi = timeseries.fill_gaps(
                timeseries.load_csv(base / entry["cpi_path"], label=f"{label} cpi")
            )
            report.n_filled = yields.n_filled + cpi.n_filled
            real = rates.build_real_rates(yields, cpi, options.window_years)
            report.negative_stats = rates.negative_stats(real)
            fit = estimation.fit_ou(real)
            report.ou_fit = fit
            report.derived = estimation.propagate(fit)
            report.regime = ou.classify_regime(ou.dimensionless(fit.params))
            if options.alt_models:
                shifted = altmodels.shift_series(real)
                report.feller_fit = estimation.fit_feller(shifted)
                report.feller_long_run = altmodels.feller_long_run(report.feller_fit)
                report.lognormal_fit = estimation.fit_lognormal(shifted)
                report.lognormal_regime = altmodels.lognormal_regime(
                    report.lognormal_fit.m, report.lognormal_fit.k2
                )
            if options.curves:
                if options.envelope:
                    report.curve = ou.discount_rate_envelope(fit, options.r0, options.grid)
                else:
                    report.curve = ou.discount_rate_curve(fit.params, options.r0, options.grid)
    except Exception as exc:  # noqa: BLE001 - failures are per-country diagnostics
        report.error = f"{type(exc).__name__}: {exc}"
    return report


def build_report(
    manifest, options: ReportOptions | None = None, base_dir=None
) -> tuple[list[CountryReport], list[Aggregate]]:
    """Run every manifest entry and aggregate; countries sorted by r_inf."""
    options = options or ReportOptions()
    if isinstance(manifest, (str, Path)):
        base_dir = base_dir or Path(manifest).parent
        manifest = load_manifest(manifest)

    if options.threads > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            reports = list(
                pool.map(lambda e: run_country(e, options, base_dir), manifest)
            )
    else:
        reports = [run_country(e, options, base_dir) for e in manifest]

    def sort_key(r: CountryReport):
        if r.ok:
            return (0, r.derived.r_inf, r.label)
        return (1, 0.0, r.label)

    reports.sort(key=sort_key)
    return reports, aggregates(reports)


def aggregates(reports: list[CountryReport]) -> list[Aggregate]:
    ok = [r for r in reports if r.ok]
    groups = {
        "all": ok,
        "stable": [r for r in ok if r.derived.r_inf > 0],
        "unstable": [r for r in ok if r.derived.r_inf <= 0],
    }
    out = []
    for name, members in groups.items():
        if not members:
            out.append(Aggregate(name, 0, math.nan, math.nan, math.nan, math.nan, math.nan))
            continue
        m = float(np.mean([r.ou_fit.params.m for r in members]))
        alpha = float(np.mean([r.ou_fit.params.alpha for r in members]))
        k2 = float(np.mean([r.ou_fit.params.k2 for r in members]))
        r_infs = np.array([r.derived.r_inf for r in members])
        sd = float(np.std(r_infs, ddof=1)) if len(r_infs) > 1 else 0.0
        out.append(
            Aggregate(name, len(members), m, alpha, k2, float(np.mean(r_infs)), sd)
        )
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.17g}"


def _write_csv(path: Path, header: str, rows: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema={SCHEMA_VERSION}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def emit(
    reports: list[CountryReport],
    aggs: list[Aggregate],
    out_dir,
    fmt: str = "csv",
) -> list[Path]:
    """Write per-country JSON plus one CSV per table shape; deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for r in reports:
        payload: dict = {"label": r.label, "error": r.error, "n_filled": r.n_filled}
        if r.ok:
            payload["negative_stats"] = {
                "fraction_negative": r.negative_stats.fraction_negative,
                "years_negative": r.negative_stats.years_negative,
            }
            payload["ou_fit"] = r.ou_fit.to_dict()
            payload["derived"] = {
                "r_inf": r.derived.r_inf,
                "se_r_inf": r.derived.se_r_inf,
                "mu": r.derived.mu,
                "se_mu": r.derived.se_mu,
                "kappa": r.derived.kappa,
                "se_kappa": r.derived.se_kappa,
            }
            payload["regime"] = {"label": r.regime.label, "r_inf_sign": r.regime.r_inf_sign}
            if r.feller_fit is not None:
                payload["feller_fit"] = r.feller_fit.to_dict()
                payload["feller_long_run"] = {
                    "y_inf": r.feller_long_run.y_inf,
                    "r_inf": r.feller_long_run.r_inf,
                    "se": r.feller_long_run.se,
                }
            if r.lognormal_fit is not None:
                payload["lognormal_fit"] = r.lognormal_fit.to_dict()
                payload["lognormal_regime"] = r.lognormal_regime.label
        path = out / f"{r.label}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)

    ok = [r for r in reports if r.ok]

    path = out / "table_negative_rates.csv"
    _write_csv(
        path,
        "country,fraction_negative,years_negative",
        [
            f"{r.label},{_fmt(r.negative_stats.fraction_negative)},{_fmt(r.negative_stats.years_negative)}"
            for r in ok
        ],
    )
    written.append(path)

    path = out / "table_ou_fit.csv"
    rows = [
        ",".join(
            [
                r.label,
                _fmt(r.ou_fit.params.m),
                _fmt(r.ou_fit.se_m),
                _fmt(r.ou_fit.params.alpha),
                _fmt(r.ou_fit.se_alpha),
                _fmt(r.ou_fit.params.k2),
                _fmt(r.ou_fit.se_k2),
                _fmt(r.derived.r_inf),
                _fmt(r.derived.se_r_inf),
            ]
        )
        for r in ok
    ]
    for a in aggs:
        rows.append(
            ",".join(
                [
                    a.group,
                    _fmt(a.mean_m),
                    "",
                    _fmt(a.mean_alpha),
                    "",
                    _fmt(a.mean_k2),
                    "",
                    _fmt(a.mean_r_inf),
                    _fmt(a.dispersion_r_inf),
                ]
            )
        )
    _write_csv(path, "country,m,se_m,alpha,se_alpha,k2,se_k2,r_inf,se_r_inf", rows)
    written.append(path)

    path = out / "table_dimensionless.csv"
    _write_csv(
        path,
        "country,mu,se_mu,kappa,se_kappa,regime",
        [
            f"{r.label},{_fmt(r.derived.mu)},{_fmt(r.derived.se_mu)},"
            f"{_fmt(r.derived.kappa)},{_fmt(r.derived.se_kappa)},{r.regime.label}"
            for r in ok
        ],
    )
    written.append(path)

    with_models = [r for r in ok if r.feller_fit is not None or r.lognormal_fit is not None]
    if with_models:
        rows = []
        for r in with_models:
            if r.feller_fit is not None:
                rows.append(
                    ",".join(
                        [
                            r.label,
                            "feller",
                            _fmt(r.feller_fit.m),
                            _fmt(r.feller_fit.alpha),
                            _fmt(r.feller_fit.k2),
                            _fmt(r.feller_fit.r_min),
                            _fmt(r.feller_long_run.r_inf),
                            _fmt(r.feller_long_run.se),
                            "",
                        ]
                    )
                )
            if r.lognormal_fit is not None:
                rows.append(
                    ",".join(
                        [
                            r.label,
                            "lognormal",
                            _fmt(r.lognormal_fit.m),
                            "",
                            _fmt(r.lognormal_fit.k2),
                            _fmt(r.lognormal_fit.r_min),
                            "",
                            "",
                            r.lognormal_regime.label,
                        ]
                    )
                )
        path = out / "table_models.csv"
        _write_csv(path, "country,model,m,alpha,k2,r_min,r_inf,se_r_inf,asymptote", rows)
        written.append(path)

    for r in ok:
        if r.curve is None:
            continue
        path = out / f"{r.label}_discount_curve.csv"
        rows = []
        for i, t in enumerate(r.curve.times):
            lo = r.curve.rate_lo[i] if r.curve.rate_lo is not None else None
            hi = r.curve.rate_hi[i] if r.curve.rate_hi is not None else None
            rows.append(
                f"{_fmt(t)},{_fmt(r.curve.rate_central[i])},{_fmt(lo)},{_fmt(hi)}"
            )
        _write_csv(path, "t,rate,rate_lo,rate_hi", rows)
        written.append(path)

    return written
