"""Real interest rates, mean-reversion calibration and long-run discounting.

Reconstructs real rates from nominal-yield and inflation series, fits
mean-reverting models (Ornstein-Uhlenbeck, shifted square-root, shifted
geometric and a two-level extension) by exact maximum likelihood with
error propagation, and evaluates discount functions, long-run discount
rates, negative-rate probabilities and regime classifications — each
closed form cross-checked against a Monte Carlo path-simulation oracle.
"""

from .altmodels import (
    ExtOUParams,
    FellerLongRun,
    LognormalRegime,
    ShiftedSeries,
    alpha0_sweep,
    digamma,
    ext_long_run,
    ext_ou_autocorr,
    ext_ou_variance,
    feller_long_run,
    lognormal_long_run,
    lognormal_mean,
    lognormal_regime,
    shift_series,
)
from .errors import DataError, NumericalError
from .estimation import (
    DerivedQuantities,
    FellerFit,
    LognormalFit,
    OUFit,
    feller_transition_logpdf,
    fit_feller,
    fit_lognormal,
    fit_ou,
    ou_fit_from_dict,
    propagate,
)
from .montecarlo import (
    DiscountEstimate,
    PathEnsemble,
    SimConfig,
    mc_discount,
    mc_negative_fraction,
    mc_negative_fraction_stderr,
    simulate_ext_ou,
    simulate_feller,
    simulate_lognormal,
    simulate_ou,
    write_ensemble_csv,
)
from .ou import (
    DiscountCurve,
    Dimensionless,
    OUParams,
    Regime,
    autocorrelation,
    classify_regime,
    dimensionless,
    discount_rate_curve,
    discount_rate_envelope,
    log_discount,
    long_run_rate,
    neg_prob,
    neg_prob_expansion,
    parse_grid,
    stationary_moments,
)
from .rates import (
    NegativeRateStats,
    RealRateSeries,
    build_real_rates,
    cpi_rates_from_index,
    forward_inflation,
    negative_stats,
    nominal_log_rate,
    real_rate,
)
from .report import (
    Aggregate,
    CountryReport,
    ReportOptions,
    aggregates,
    build_report,
    emit,
    load_manifest,
    run_country,
)
from .timeseries import (
    Observation,
    TimeSeries,
    align,
    fill_gaps,
    load_csv,
    parse_date,
    step_durations,
    time_in_years,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
