"""Command-line front end.

Verbs: rates, negstats, fit, discount, classify, feller, lognormal,
extou-sweep, simulate, verify, report.  Long flags only; rates are decimal
fractions; grid specs are ``geometric:start:stop:n`` or
``linear:start:stop:n``.  Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical failure.  Diagnostics go to stderr; every verb writes
its primary artifact to ``--out`` (``-`` streams to stdout).
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import math
import os
import secrets
import sys

import numpy as np
from scipy.special import erfc

from . import altmodels, estimation, montecarlo, ou, rates, report, timeseries
from .errors import DataError, NumericalError

_SCHEMA = report.SCHEMA_VERSION


def _fmt(x) -> str:
    return f"{x:.17g}"


@contextlib.contextmanager
def _output(out: str):
    """Writable handle for --out; '-' streams to stdout."""
    if out == "-":
        yield sys.stdout
    else:
        with open(out, "w", encoding="utf-8") as fh:
            yield fh


def _resolve_seed(args) -> int:
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = secrets.randbelow(2**31)
        print(f"seed not given; using --seed {seed}", file=sys.stderr)
    return seed


def _load_series(path: str, label: str) -> timeseries.TimeSeries:
    return timeseries.fill_gaps(timeseries.load_csv(path, label=label))


def _load_real_input(args) -> object:
    """Either a precomputed real-rate CSV (--input) or the yields+cpi pair."""
    if getattr(args, "input", None):
        return _load_series(args.input, "real")
    if getattr(args, "yields", None) and getattr(args, "cpi", None):
        yields = _load_series(args.yields, "yields")
        cpi = _load_series(args.cpi, "cpi")
        return rates.build_real_rates(yields, cpi, args.window)
    raise DataError("provide --input, or both --yields and --cpi")


def _write_series_csv(fh, ts: timeseries.TimeSeries, value_name: str) -> None:
    fh.write(f"# schema={_SCHEMA}\n")
    fh.write(f"date,{value_name}\n")
    for obs in ts.observations:
        fh.write(f"{obs.date.isoformat()},{_fmt(obs.value)}\n")


def _write_json(fh, payload: dict) -> None:
    json.dump(payload, fh, indent=2, sort_keys=True)
    fh.write("\n")


def _load_fit(path: str) -> estimation.OUFit:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("model", "ou") != "ou":
        raise DataError(f"expected an OU fit, got model={payload.get('model')!r}")
    return estimation.ou_fit_from_dict(payload)


# --------------------------------------------------------------------------
# verb implementations


def _cmd_rates(args) -> int:
    real = _load_real_input(args)
    ts = real.series if isinstance(real, rates.RealRateSeries) else real
    with _output(args.out) as fh:
        _write_series_csv(fh, ts, "real_rate")
    return 0


def _cmd_negstats(args) -> int:
    real = _load_real_input(args)
    if not isinstance(real, rates.RealRateSeries):
        real = rates.RealRateSeries(
            series=real, nominal_label="", inflation_label="", window_years=args.window
        )
    stats = rates.negative_stats(real)
    with _output(args.out) as fh:
        _write_json(
            fh,
            {
                "fraction_negative": stats.fraction_negative,
                "years_negative": stats.years_negative,
            },
        )
    return 0


def _cmd_fit(args) -> int:
    real = _load_real_input(args)
    if args.model == "ou":
        fit = estimation.fit_ou(real, force_numerical=args.force_numerical)
        payload = fit.to_dict()
        derived = estimation.propagate(fit)
        payload["derived"] = {
            "r_inf": derived.r_inf,
            "se_r_inf": derived.se_r_inf,
            "mu": derived.mu,
            "se_mu": derived.se_mu,
            "kappa": derived.kappa,
            "se_kappa": derived.se_kappa,
        }
    elif args.model == "feller":
        payload = estimation.fit_feller(altmodels.shift_series(real)).to_dict()
    else:
        payload = estimation.fit_lognormal(altmodels.shift_series(real)).to_dict()
    with _output(args.out) as fh:
        _write_json(fh, payload)
    return 0


def _cmd_discount(args) -> int:
    fit = _load_fit(args.fit)
    if args.envelope:
        curve = ou.discount_rate_envelope(fit, args.r0, args.grid)
    else:
        curve = ou.discount_rate_curve(fit.params, args.r0, args.grid)
    with _output(args.out) as fh:
        fh.write(f"# schema={_SCHEMA}\n")
        fh.write("t,rate,rate_lo,rate_hi\n")
        for i, t in enumerate(curve.times):
            lo = _fmt(curve.rate_lo[i]) if curve.rate_lo is not None else ""
            hi = _fmt(curve.rate_hi[i]) if curve.rate_hi is not None else ""
            fh.write(f"{_fmt(t)},{_fmt(curve.rate_central[i])},{lo},{hi}\n")
    return 0


def _cmd_classify(args) -> int:
    fit = _load_fit(args.fit)
    d = ou.dimensionless(fit.params)
    regime = ou.classify_regime(d)
    derived = estimation.propagate(fit)
    with _output(args.out) as fh:
        _write_json(
            fh,
            {
                "mu": d.mu,
                "se_mu": derived.se_mu,
                "kappa": d.kappa,
                "se_kappa": derived.se_kappa,
                "regime": regime.label,
                "r_inf_sign": regime.r_inf_sign,
                "r_inf": derived.r_inf,
                "se_r_inf": derived.se_r_inf,
                "neg_prob": ou.neg_prob(d),
            },
        )
    return 0


def _cmd_feller(args) -> int:
    real = _load_real_input(args)
    shifted = altmodels.shift_series(real)
    fit = estimation.fit_feller(shifted)
    long_run = altmodels.feller_long_run(fit)
    payload = fit.to_dict()
    payload["long_run"] = {
        "y_inf": long_run.y_inf,
        "r_inf": long_run.r_inf,
        "se": long_run.se,
    }
    with _output(args.out) as fh:
        _write_json(fh, payload)
    return 0


def _cmd_lognormal(args) -> int:
    real = _load_real_input(args)
    shifted = altmodels.shift_series(real)
    fit = estimation.fit_lognormal(shifted)
    regime = altmodels.lognormal_regime(fit.m, fit.k2)
    payload = fit.to_dict()
    payload["regime"] = regime.label
    payload["drift_gap"] = fit.m - fit.k2 / 2.0
    if regime.label == "exponential":
        payload["y_inf"] = altmodels.lognormal_long_run(fit.m, fit.k2)
    with _output(args.out) as fh:
        _write_json(fh, payload)
    return 0


def _cmd_extou_sweep(args) -> int:
    fit = _load_fit(args.fit)
    lo, hi = args.alpha0_min, args.alpha0_max
    if lo is None:
        lo = 0.01 * fit.params.alpha
    if hi is None:
        hi = 0.99 * fit.params.alpha
    grid = np.linspace(lo, hi, args.points)
    values = altmodels.alpha0_sweep(fit, args.variance, grid)
    with _output(args.out) as fh:
        fh.write(f"# schema={_SCHEMA}\n")
        fh.write("alpha0,alpha0_over_alpha,r_inf_ext\n")
        for a0, v in zip(grid, values):
            fh.write(f"{_fmt(a0)},{_fmt(a0 / fit.params.alpha)},{_fmt(v)}\n")
    return 0


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    cfg = montecarlo.SimConfig(
        n_paths=args.paths,
        horizon=args.horizon,
        dt=args.dt,
        seed=seed,
        r0=args.r0,
    )
    shift = 0.0
    if args.model == "ou":
        fit = _load_fit(args.fit)
        ensemble = montecarlo.simulate_ou(fit.params, cfg)
    elif args.model == "extou":
        p = altmodels.ExtOUParams(
            m0=args.m0, alpha=args.alpha, k2=args.k2, alpha0=args.alpha0, k02=args.k02
        )
        ensemble = montecarlo.simulate_ext_ou(p, cfg)
    elif args.model == "feller":
        ensemble = montecarlo.simulate_feller(args.m, args.alpha, args.k2, cfg)
        shift = args.shift
    else:  # lognormal
        ensemble = montecarlo.simulate_lognormal(args.m, args.k2, args.r0, cfg)
        shift = args.shift
    estimates = montecarlo.mc_discount(ensemble, shift=shift)
    with _output(args.out) as fh:
        fh.write(f"# schema={_SCHEMA}\n")
        fh.write(f"# seed={seed}\n")
        fh.write("t,discount,stderr\n")
        for est in estimates:
            fh.write(f"{_fmt(est.t)},{_fmt(est.estimate)},{_fmt(est.stderr)}\n")
    return 0


def _transient_moments(p, r0: float, t):
    """Exact conditional mean and variance of the rate at time t given r0."""
    decay = np.exp(-p.alpha * np.asarray(t, dtype=float))
    mean = p.m + (r0 - p.m) * decay
    var = p.k2 / (2.0 * p.alpha) * (1.0 - decay * decay)
    return mean, var


def run_verify(fit: estimation.OUFit, paths: int, seed: int, fh) -> bool:
    """Analytic-vs-Monte-Carlo checks for a fitted model; deterministic output.

    Checks the discount function at t in {1, 10, 50}, the expected
    negative-rate occupation over the second half of the horizon, and the
    exact conditional mean and variance at the horizon, each at three Monte
    Carlo standard errors.  All analytic values use the exact transient law,
    so slow-reverting fits are not biased by an unfinished relaxation.
    Writes a pass/fail table and returns overall success.
    """
    p = fit.params
    r0 = 0.01
    horizon, dt = 50.0, 0.01
    rows: list[tuple[str, float, float, float]] = []

    cfg = montecarlo.SimConfig(
        n_paths=paths, horizon=horizon, dt=dt, seed=seed, r0=r0,
        save_times=(1.0, 10.0, 50.0),
    )
    ensemble = montecarlo.simulate_ou(p, cfg)
    for est in montecarlo.mc_discount(ensemble):
        if est.t == 0.0:
            continue
        analytic = math.exp(ou.log_discount(p, r0, est.t))
        rows.append((f"discount t={est.t:g}", analytic, est.estimate, est.stderr))

    frac = montecarlo.mc_negative_fraction(ensemble)
    frac_se = montecarlo.mc_negative_fraction_stderr(ensemble)
    # expected occupation on the same trapezoid grid as the estimator
    n_steps = int(round(horizon / dt))
    late_start = horizon / 2.0 - 1e-12
    grid = np.arange(n_steps + 1) * dt
    mean_t, var_t = _transient_moments(p, r0, grid)
    sd_t = np.sqrt(np.maximum(var_t, 0.0))
    with np.errstate(divide="ignore"):
        z_t = np.where(sd_t > 0, mean_t / np.where(sd_t > 0, sd_t, 1.0), np.inf)
    p_neg = 0.5 * erfc(z_t / math.sqrt(2.0))
    steps = np.arange(n_steps) * dt >= late_start
    expected_occ = float(
        np.sum(0.5 * (p_neg[:-1][steps] + p_neg[1:][steps]) * dt)
    ) / (horizon / 2.0)
    rows.append(("negative occupation", expected_occ, frac, frac_se))

    terminal = ensemble.values[-1]
    mean_se = float(np.std(terminal, ddof=1) / math.sqrt(paths))
    m_exact, v_exact = _transient_moments(p, r0, horizon)
    rows.append(("terminal mean", float(m_exact), float(np.mean(terminal)), mean_se))
    var_hat = float(np.var(terminal, ddof=1))
    var_se = var_hat * math.sqrt(2.0 / (paths - 1))
    rows.append(("terminal variance", float(v_exact), var_hat, var_se))

    fh.write(f"# schema={_SCHEMA}\n")
    fh.write(f"# seed={seed} paths={paths}\n")
    fh.write("check,analytic,mc,mc_stderr,z,status\n")
    ok = True
    for name, analytic, mc, se in rows:
        z = abs(mc - analytic) / se if se > 0 else 0.0
        status = "pass" if z <= 3.0 else "FAIL"
        ok = ok and status == "pass"
        fh.write(f"{name},{_fmt(analytic)},{_fmt(mc)},{_fmt(se)},{_fmt(z)},{status}\n")
    fh.write("overall," + ("pass" if ok else "FAIL") + ",,,,\n")
    return ok


def _cmd_verify(args) -> int:
    fit = _load_fit(args.fit)
    seed = _resolve_seed(args)
    with _output(args.out) as fh:
        ok = run_verify(fit, args.paths, seed, fh)
    if not ok:
        print("verify: one or more checks failed", file=sys.stderr)
    return 0 if ok else 3


def _cmd_report(args) -> int:
    out_dir = args.out_dir or os.environ.get("LONGRUN_OUT_DIR") or "."
    options = report.ReportOptions(
        window_years=args.window,
        r0=args.r0,
        grid=args.grid,
        curves=args.curves,
        envelope=args.envelope,
        alt_models=args.alt_models,
        threads=args.threads,
    )
    reports, aggs = report.build_report(args.manifest, options)
    written = report.emit(reports, aggs, out_dir)
    for r in reports:
        if not r.ok:
            print(f"report: {r.label}: {r.error}", file=sys.stderr)
    for path in written:
        print(path, file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# argument grammar


def _add_real_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="precomputed real-rate CSV (date,value)")
    p.add_argument("--yields", help="nominal yields CSV (decimal fractions)")
    p.add_argument("--cpi", help="annualized CPI change rates CSV")
    p.add_argument("--window", type=int, default=10, help="forward inflation window, years")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="longrun",
        description="Real-rate reconstruction, mean-reversion calibration and "
        "long-run discounting analytics.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("rates", help="reconstruct the real-rate series")
    _add_real_input_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser("negstats", help="negative-rate statistics")
    _add_real_input_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_negstats)

    p = sub.add_parser("fit", help="maximum-likelihood model fit")
    _add_real_input_flags(p)
    p.add_argument("--model", choices=("ou", "feller", "lognormal"), default="ou")
    p.add_argument("--force-numerical", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("discount", help="discount-rate curve from a fit")
    p.add_argument("--fit", required=True)
    p.add_argument("--r0", type=float, default=0.01)
    p.add_argument("--grid", default=None, help="geometric:start:stop:n or linear:start:stop:n")
    p.add_argument("--envelope", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_discount)

    p = sub.add_parser("classify", help="dimensionless parameters and regime")
    p.add_argument("--fit", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("feller", help="shifted square-root model fit")
    _add_real_input_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_feller)

    p = sub.add_parser("lognormal", help="shifted geometric model fit")
    _add_real_input_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_lognormal)

    p = sub.add_parser("extou-sweep", help="long-run rate vs slow reversion strength")
    p.add_argument("--fit", required=True)
    p.add_argument("--variance", type=float, required=True, help="historical variance")
    p.add_argument("--alpha0-min", type=float, default=None)
    p.add_argument("--alpha0-max", type=float, default=None)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_extou_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo path simulation")
    p.add_argument("--model", choices=("ou", "feller", "lognormal", "extou"), default="ou")
    p.add_argument("--fit", help="OU fit JSON (model ou)")
    p.add_argument("--m", type=float, help="reversion level / drift")
    p.add_argument("--alpha", type=float, help="reversion strength")
    p.add_argument("--k2", type=float, help="squared noise amplitude")
    p.add_argument("--m0", type=float, help="extou: outer reversion level")
    p.add_argument("--alpha0", type=float, help="extou: slow reversion strength")
    p.add_argument("--k02", type=float, help="extou: slow noise amplitude")
    p.add_argument("--shift", type=float, default=0.0, help="r_min shift for shifted models")
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--r0", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="analytic-vs-Monte-Carlo validation")
    p.add_argument("--fit", required=True)
    p.add_argument("--paths", type=int, default=100000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("report", help="batch per-country pipeline from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--r0", type=float, default=0.01)
    p.add_argument("--grid", default=None)
    p.add_argument("--curves", action="store_true")
    p.add_argument("--envelope", action="store_true")
    p.add_argument("--alt-models", action="store_true")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=_cmd_report)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; fold usage into 1.
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

def run_capture(argv) -> tuple[int, str]:
    """In-process run with captured stdout (for tests and embedding)."""
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = run(argv)
    return code, buf.getvalue()


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
