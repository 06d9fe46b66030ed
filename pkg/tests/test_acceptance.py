"""End-to-end acceptance checks.

Each test covers one numbered criterion and prints a single pass/fail line
to the terminal (bypassing capture) before asserting, so a full run yields
one line per criterion regardless of verbosity flags.
"""

import json
import math

import numpy as np
import pytest

from longrun import (
    Dimensionless,
    ExtOUParams,
    FellerFit,
    OUFit,
    OUParams,
    SimConfig,
    alpha0_sweep,
    classify_regime,
    dimensionless,
    discount_rate_envelope,
    ext_long_run,
    ext_ou_autocorr,
    ext_ou_variance,
    feller_long_run,
    fit_feller,
    fit_lognormal,
    fit_ou,
    lognormal_regime,
    log_discount,
    long_run_rate,
    mc_discount,
    mc_negative_fraction,
    mc_negative_fraction_stderr,
    neg_prob,
    neg_prob_expansion,
    simulate_ou,
)
from longrun.cli import run_capture

from conftest import simulate_ar1

# Published point estimates (m, alpha, k2) with standard errors.
USA = dict(m=0.0319, alpha=0.0603, k2=10.03e-5)
USA_SE = dict(se_m=0.0123, se_alpha=0.0257, se_k2=1.05e-5)
GERMANY = dict(m=-0.0945, alpha=0.0071, k2=41.72e-4)
GERMANY_SE = dict(se_m=0.6695, se_alpha=0.0089, se_k2=2.19e-4)
SOUTH_AFRICA = dict(m=0.0269, alpha=0.0154, k2=4.35e-5)
SOUTH_AFRICA_SE = dict(se_m=0.0472, se_alpha=0.0193, se_k2=0.34e-5)
SPAIN = dict(m=0.0671, alpha=0.0167, k2=23.71e-5)
SPAIN_SE = dict(se_m=0.0692, se_alpha=0.0137, se_k2=1.26e-5)
NETHERLANDS = dict(m=0.0599, alpha=0.1648, k2=17.97e-5)
UK = dict(m=0.0342, alpha=0.1635, k2=31.37e-5)

FIG_GRID = "geometric:0.25:500:200"


def _fit(params: dict, ses: dict) -> OUFit:
    return OUFit(params=OUParams(**params), n_obs=100, loglik=0.0, **ses)


def _report(capsys, num: int, name: str, ok: bool, detail: str = "") -> None:
    with capsys.disabled():
        status = "PASS" if ok else "FAIL"
        tail = f"  ({detail})" if detail else ""
        print(f"[{status}] criterion {num:02d}: {name}{tail}")
    assert ok, f"criterion {num} failed: {name} {detail}"


def test_criterion_01_negative_rate_probability(capsys):
    value = neg_prob(Dimensionless(mu=1.0, kappa=1.0))
    ok = abs(value - 0.079) <= 5e-4
    _report(capsys, 1, "neg_prob at mu = kappa is 0.079", ok, f"value={value:.6f}")


def test_criterion_02_long_run_rates_and_dimensionless(capsys):
    checks = []
    checks.append(abs(long_run_rate(OUParams(**USA)) - 0.0181) <= 5e-4)
    checks.append(abs(long_run_rate(OUParams(**NETHERLANDS)) - 0.0566) <= 5e-4)
    d_usa = dimensionless(OUParams(**USA))
    checks.append(abs(d_usa.mu - 0.53) <= 0.01 and abs(d_usa.kappa - 0.68) <= 0.01)
    d_uk = dimensionless(OUParams(**UK))
    checks.append(abs(d_uk.mu - 0.21) <= 0.01 and abs(d_uk.kappa - 0.27) <= 0.01)
    _report(
        capsys,
        2,
        "long-run rates and dimensionless pairs from published parameters",
        all(checks),
        f"subchecks={checks}",
    )


def test_criterion_03_lognormal_drift_gap_and_regime(capsys):
    m_l, k2_l = 0.0130, 0.0309
    gap = m_l - k2_l / 2.0
    regime = lognormal_regime(m_l, k2_l)
    ok = abs(gap - (-0.0024)) <= 1e-4 and regime.label == "constant"
    _report(
        capsys,
        3,
        "geometric-model drift gap -0.0024 and constant asymptote",
        ok,
        f"gap={gap:.5f} regime={regime.label}",
    )


def test_criterion_04_discount_closed_form_vs_monte_carlo(capsys):
    p = OUParams(**USA)
    r0 = 0.01
    cfg = SimConfig(
        n_paths=100_000, horizon=50.0, dt=0.01, seed=42, r0=r0,
        save_times=(1.0, 10.0, 50.0),
    )
    ensemble = simulate_ou(p, cfg)
    worst = 0.0
    ok = True
    for est in mc_discount(ensemble):
        if est.t == 0.0:
            continue
        exact = math.exp(log_discount(p, r0, est.t))
        z = abs(est.estimate - exact) / est.stderr
        worst = max(worst, z)
        ok = ok and abs(est.estimate - exact) / est.estimate <= 3.0 * (
            est.stderr / est.estimate
        )
    _report(
        capsys,
        4,
        "analytic discount within 3 MC stderr at t in {1, 10, 50}",
        ok,
        f"worst z={worst:.2f}",
    )


def test_criterion_05_negative_occupation_monte_carlo(capsys):
    # mu = kappa: m/alpha = sqrt(k2)/alpha^1.5 with (m, alpha, k2) below
    p = OUParams(m=0.02, alpha=1.0, k2=4e-4)
    cfg = SimConfig(n_paths=8192, horizon=40.0, dt=0.02, seed=7, r0=p.m)
    ensemble = simulate_ou(p, cfg)
    frac = mc_negative_fraction(ensemble)
    se = mc_negative_fraction_stderr(ensemble)
    exact = neg_prob(dimensionless(p))
    ok = abs(frac - exact) <= 3.0 * se
    _report(
        capsys,
        5,
        "ergodic negative-rate occupation matches 0.079",
        ok,
        f"mc={frac:.4f} exact={exact:.4f} se={se:.4f}",
    )


def test_criterion_06_ou_recovery_and_coverage(capsys):
    truth = dict(m=0.03, alpha=0.06, k2=1e-4)
    delta, n, reps = 0.25, 2000, 200

    values = simulate_ar1(**truth, delta=delta, n=n, seed=11)
    fit = fit_ou(values, deltas=delta)
    recovery_ok = (
        abs(fit.params.m - truth["m"]) <= 3 * fit.se_m
        and abs(fit.params.alpha - truth["alpha"]) <= 3 * fit.se_alpha
        and abs(fit.params.k2 - truth["k2"]) <= 3 * fit.se_k2
    )

    hits = np.zeros(3)
    for rep in range(reps):
        sample = simulate_ar1(**truth, delta=delta, n=n, seed=5000 + rep)
        f = fit_ou(sample, deltas=delta)
        hits[0] += abs(f.params.m - truth["m"]) <= f.se_m
        hits[1] += abs(f.params.alpha - truth["alpha"]) <= f.se_alpha
        hits[2] += abs(f.params.k2 - truth["k2"]) <= f.se_k2
    coverage = hits / reps
    coverage_ok = bool(np.all((coverage >= 0.58) & (coverage <= 0.78)))
    _report(
        capsys,
        6,
        "OU estimator recovery and 1-sigma coverage in [0.58, 0.78]",
        recovery_ok and coverage_ok,
        f"coverage={np.round(coverage, 3).tolist()}",
    )


def test_criterion_07_feller_and_lognormal_recovery(capsys):
    # square-root model
    truth_f = dict(m=0.09, alpha=0.06, k2=1.2e-4)
    rng = np.random.default_rng(41)
    delta, n = 0.25, 2000
    a = math.exp(-truth_f["alpha"] * delta)
    df = 4 * truth_f["alpha"] * truth_f["m"] / truth_f["k2"]
    scale = truth_f["k2"] * (1 - a) / (4 * truth_f["alpha"])
    y = np.empty(n)
    y[0] = truth_f["m"]
    for i in range(n - 1):
        y[i + 1] = scale * rng.noncentral_chisquare(df, y[i] * a / scale)
    fit_f = fit_feller(y, deltas=delta)
    feller_ok = (
        abs(fit_f.m - truth_f["m"]) <= 3 * fit_f.se_m
        and abs(fit_f.alpha - truth_f["alpha"]) <= 3 * fit_f.se_alpha
        and abs(fit_f.k2 - truth_f["k2"]) <= 3 * fit_f.se_k2
    )

    # geometric model
    m_l, k2_l = 0.013, 0.031
    rng = np.random.default_rng(47)
    x = (m_l - k2_l / 2) * delta + math.sqrt(k2_l * delta) * rng.standard_normal(n - 1)
    g = 0.05 * np.exp(np.concatenate([[0.0], np.cumsum(x)]))
    fit_l = fit_lognormal(g, deltas=delta)
    lognormal_ok = (
        abs(fit_l.m - m_l) <= 3 * fit_l.se_m and abs(fit_l.k2 - k2_l) <= 3 * fit_l.se_k2
    )
    _report(
        capsys,
        7,
        "square-root and geometric estimators recover synthetic truth",
        feller_ok and lognormal_ok,
        f"feller={feller_ok} lognormal={lognormal_ok}",
    )


def test_criterion_08_feller_long_run_reduction_and_monotonicity(capsys):
    def ffit(k2):
        return FellerFit(
            m=0.09, alpha=0.06, k2=k2, se_m=0.0, se_alpha=0.0, se_k2=0.0,
            r_min=-0.04, n_obs=100, loglik=0.0,
        )

    zero = feller_long_run(ffit(0.0))
    reduction_ok = zero.y_inf == 0.09 and zero.r_inf == (-0.04 + 0.09)
    sweep = [feller_long_run(ffit(k2)).y_inf for k2 in np.linspace(0.0, 5e-3, 10)]
    monotone_ok = all(a > b for a, b in zip(sweep, sweep[1:]))
    _report(
        capsys,
        8,
        "square-root long-run rate: exact zero-noise reduction, decreasing in k2",
        reduction_ok and monotone_ok,
    )


def test_criterion_09_extended_model_identities_and_sweep(capsys):
    rng = np.random.default_rng(2024)
    identity_ok = True
    for _ in range(100):
        alpha = rng.uniform(0.02, 2.0)
        p = ExtOUParams(
            m0=rng.uniform(-0.05, 0.1),
            alpha=alpha,
            k2=rng.uniform(0.0, 1e-3),
            alpha0=alpha * rng.uniform(0.01, 0.9),
            k02=rng.uniform(0.0, 1e-3),
        )
        var = ext_ou_variance(p)
        if abs(ext_ou_autocorr(p, 0.0) - var) > 1e-12 * abs(var):
            identity_ok = False
            break

    frozen = ExtOUParams(m0=0.0319, alpha=0.0603, k2=10.03e-5, alpha0=0.003, k02=0.0)
    reduction_ok = ext_long_run(frozen) == long_run_rate(OUParams(**USA))

    grid = np.linspace(1e-4, 0.05, 100_000)
    curve = alpha0_sweep(OUParams(**USA), 9.82e-4, grid)
    crossing = grid[int(np.argmin(np.abs(curve)))] / USA["alpha"]
    crossing_ok = abs(crossing - 0.05) <= 0.01
    _report(
        capsys,
        9,
        "two-level model: variance identity, exact reduction, zero crossing",
        identity_ok and reduction_ok and crossing_ok,
        f"crossing={crossing:.4f}",
    )


def test_criterion_10_asymptotic_expansions(capsys):
    small_ok = True
    for ratio in (0.01, 0.02, 0.05):
        d = Dimensionless(mu=ratio, kappa=1.0)
        approx, tag = neg_prob_expansion(d)
        small_ok = small_ok and tag == "small-ratio"
        small_ok = small_ok and abs(approx - neg_prob(d)) <= 1e-3
    large_ok = True
    for ratio in (4.0, 5.0, 8.0):
        d = Dimensionless(mu=ratio, kappa=1.0)
        approx, tag = neg_prob_expansion(d)
        exact = neg_prob(d)
        large_ok = large_ok and tag == "large-ratio"
        large_ok = large_ok and abs(approx - exact) <= 0.20 * exact
    _report(
        capsys,
        10,
        "small-ratio expansion to 1e-3 absolute, large-ratio to 20% relative",
        small_ok and large_ok,
    )


def test_criterion_11a_envelope_contains_central_curve(capsys):
    rows = [
        ("USA", USA, USA_SE),
        ("Germany", GERMANY, GERMANY_SE),
        ("South Africa", SOUTH_AFRICA, SOUTH_AFRICA_SE),
        ("Spain", SPAIN, SPAIN_SE),
    ]
    ok = True
    for _, params, ses in rows:
        curve = discount_rate_envelope(_fit(params, ses), r0=0.01, grid=FIG_GRID)
        ok = ok and bool(
            np.all(curve.rate_lo <= curve.rate_central)
            and np.all(curve.rate_central <= curve.rate_hi)
        )
    _report(capsys, 11, "central discount-rate curve inside its envelope", ok)


def test_criterion_11b_usa_envelope_ceiling(capsys):
    curve = discount_rate_envelope(_fit(USA, USA_SE), r0=0.01, grid=FIG_GRID)
    peak = float(np.max(curve.rate_hi))
    ok = peak < 0.022
    _report(
        capsys,
        11,
        "USA envelope maximum below 0.022",
        ok,
        f"max={peak:.4f}",
    )


def test_criterion_12_verify_is_deterministic(capsys, tmp_path):
    fit = _fit(USA, USA_SE)
    fit_path = tmp_path / "fit.json"
    fit_path.write_text(json.dumps(fit.to_dict()))
    argv = ["verify", "--fit", str(fit_path), "--paths", "8192", "--seed", "42"]
    code1, out1 = run_capture(argv)
    code2, out2 = run_capture(argv)
    ok = code1 == 0 and code2 == 0 and out1 == out2
    _report(
        capsys,
        12,
        "verify with a fixed seed is byte-identical across runs",
        ok,
        f"codes=({code1},{code2}) identical={out1 == out2}",
    )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
