"""Brute-force path-simulation oracle for every closed form in the package.

Paths are stepped with each model's exact conditional transition law (no
discretization bias for the Gaussian and geometric models; the square-root
model uses its noncentral chi-square law), while the rate integral feeding
the discount estimate D(t) = E[exp(-int r)] is accumulated by the
trapezoid rule at the simulation step.

Randomness comes from numpy's splittable SeedSequence: paths are organized
in fixed-size blocks of 4096, block b drawing from spawn child b of the
seed.  Path identity is (block, lane), so path i is reproducible
independent of the total path count, and identical configurations produce
bit-identical ensembles.  Gaussian variates use numpy's ziggurat sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .altmodels import ExtOUParams
from .errors import DataError
from .ou import OUParams

#: Paths per substream block.  Fixed: changing it would change the stream
#: layout and therefore every sampled path.
BLOCK = 4096

#: Splitting-error ceiling for the two-level model's frozen-level stepping.
EXT_OU_DT_CEILING = 0.01


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    horizon: float
    dt: float
    seed: int
    r0: float
    save_times: tuple | None = None  # default: every whole year plus the horizon

    def __post_init__(self):
        if self.dt <= 0:
            raise DataError("dt must be positive")
        if self.horizon < self.dt:
            raise DataError("horizon must be at least one step")
        if self.n_paths < 1:
            raise DataError("need at least one path")


@dataclass(frozen=True)
class PathEnsemble:
    """Sampled rate paths on a save grid plus their accumulated integrals."""

    times: np.ndarray  # (n_save,)
    values: np.ndarray  # (n_save, n_paths) rate at each save time
    integrals: np.ndarray  # (n_save, n_paths) running integral of the rate
    neg_occupation: np.ndarray  # (n_paths,) time spent below zero
    neg_occupation_late: np.ndarray  # (n_paths,) same, second half of the horizon
    config: SimConfig


@dataclass(frozen=True)
class DiscountEstimate:
    t: float
    estimate: float
    stderr: float


def _prepare(cfg: SimConfig) -> tuple[int, np.ndarray]:
    """Number of steps and sorted save-step indices (always including 0)."""
    steps_float = cfg.horizon / cfg.dt
    n_steps = int(round(steps_float))
    if abs(steps_float - n_steps) > 1e-6:
        raise DataError("horizon must be a whole number of steps")
    if cfg.save_times is None:
        times = list(np.arange(1.0, cfg.horizon, 1.0)) + [cfg.horizon]
    else:
        times = list(cfg.save_times)
    idx = {0}
    for t in times:
        j = int(round(t / cfg.dt))
        if not 0 <= j <= n_steps or abs(j * cfg.dt - t) > 1e-6:
            raise DataError(f"save time {t} is not on the step grid")
        idx.add(j)
    return n_steps, np.array(sorted(idx), dtype=int)


def _block_streams(cfg: SimConfig):
    """Yield (offset, width, generator) per fixed-size path block."""
    n_blocks = (cfg.n_paths + BLOCK - 1) // BLOCK
    children = np.random.SeedSequence(cfg.seed).spawn(n_blocks)
    for b in range(n_blocks):
        offset = b * BLOCK
        width = min(BLOCK, cfg.n_paths - offset)
        yield offset, width, np.random.default_rng(children[b])


def _alloc(cfg: SimConfig, save_idx: np.ndarray):
    n_save = len(save_idx)
    return (
        np.empty((n_save, cfg.n_paths)),
        np.empty((n_save, cfg.n_paths)),
        np.empty(cfg.n_paths),
        np.empty(cfg.n_paths),
    )


def _run_blocks(cfg: SimConfig, step_fn, init_fn, normals_per_step: int) -> PathEnsemble:
    """Shared driver: exact-transition stepping with trapezoid integration.

    ``init_fn(width) -> state``; ``step_fn(state, z) -> (state, r_new)``
    where ``z`` holds ``normals_per_step`` rows of standard normals and the
    rate is the first coordinate of the state.
    """
    n_steps, save_idx = _prepare(cfg)
    save_slot = {int(j): s for s, j in enumerate(save_idx)}
    values, integrals, negs, negs_late = _alloc(cfg, save_idx)
    late_start = cfg.horizon / 2.0 - 1e-12

    for offset, width, rng in _block_streams(cfg):
        # Always simulate the full block width so path (block, lane) is
        # identical regardless of the total path count; surplus lanes of the
        # final block are simply discarded.
        if normals_per_step:
            z_all = rng.standard_normal((n_steps, normals_per_step, BLOCK))
        state, r = init_fn(BLOCK, rng)
        integral = np.zeros(BLOCK)
        occ = np.zeros(BLOCK)
        occ_late = np.zeros(BLOCK)
        sl = slice(offset, offset + width)
        if 0 in save_slot:
            values[save_slot[0], sl] = r[:width]
            integrals[save_slot[0], sl] = 0.0
        for j in range(n_steps):
            z = z_all[j] if normals_per_step else None
            state, r_new = step_fn(state, z, rng, BLOCK)
            below = 0.5 * ((r < 0).astype(float) + (r_new < 0).astype(float)) * cfg.dt
            integral += 0.5 * (r + r_new) * cfg.dt
            occ += below
            if j * cfg.dt >= late_start:
                occ_late += below
            r = r_new
            slot = save_slot.get(j + 1)
            if slot is not None:
                values[slot, sl] = r[:width]
                integrals[slot, sl] = integral[:width]
        negs[sl] = occ[:width]
        negs_late[sl] = occ_late[:width]

    return PathEnsemble(
        times=save_idx * cfg.dt,
        values=values,
        integrals=integrals,
        neg_occupation=negs,
        neg_occupation_late=negs_late,
        config=cfg,
    )


def simulate_ou(p: OUParams, cfg: SimConfig) -> PathEnsemble:
    """Exact-transition sampling of dr = -alpha (r - m) dt + k dw."""
    a = math.exp(-p.alpha * cfg.dt)
    sd = math.sqrt(p.k2 * (1.0 - a * a) / (2.0 * p.alpha))

    def init(width, rng):
        r = np.full(width, cfg.r0)
        return r, r

    def step(r, z, rng, width):
        r_new = p.m + (r - p.m) * a + sd * z[0]
        return r_new, r_new

    return _run_blocks(cfg, step, init, normals_per_step=1)


def simulate_ext_ou(p: ExtOUParams, cfg: SimConfig) -> PathEnsemble:
    """Two-level model: the reversion level follows its own exact transition;
    the rate steps conditionally on the level frozen over one dt.

    The splitting error is O(dt^2); the step must satisfy
    dt <= 0.01 / alpha to keep it below Monte Carlo noise.
    """
    if cfg.dt > EXT_OU_DT_CEILING / p.alpha * (1.0 + 1e-9):
        raise DataError(
            f"dt={cfg.dt} too coarse for alpha={p.alpha}; "
            f"need dt <= {EXT_OU_DT_CEILING / p.alpha:.4g}"
        )
    a = math.exp(-p.alpha * cfg.dt)
    sd = math.sqrt(p.k2 * (1.0 - a * a) / (2.0 * p.alpha)) if p.k2 > 0 else 0.0
    a0 = math.exp(-p.alpha0 * cfg.dt)
    sd0 = math.sqrt(p.k02 * (1.0 - a0 * a0) / (2.0 * p.alpha0)) if p.k02 > 0 else 0.0

    def init(width, rng):
        r = np.full(width, cfg.r0)
        level = np.full(width, p.m0)
        return (r, level), r

    def step(state, z, rng, width):
        r, level = state
        r_new = level + (r - level) * a + sd * z[0]
        level_new = p.m0 + (level - p.m0) * a0 + sd0 * z[1]
        return (r_new, level_new), r_new

    return _run_blocks(cfg, step, init, normals_per_step=2)


def simulate_feller(m: float, alpha: float, k2: float, cfg: SimConfig) -> PathEnsemble:
    """Exact sampling of dy = -alpha (y - m) dt + sqrt(k2 y) dw.

    The transition is the scaled noncentral chi-square law, so paths stay
    nonnegative by construction.  The initial state is cfg.r0 (> 0).
    """
    if m <= 0 or alpha <= 0 or k2 < 0:
        raise DataError("Feller simulation needs m > 0, alpha > 0, k2 >= 0")
    if cfg.r0 <= 0:
        raise DataError("initial state must be positive")
    a = math.exp(-alpha * cfg.dt)
    if k2 == 0.0:

        def init0(width, rng):
            y = np.full(width, cfg.r0)
            return y, y

        def step0(y, z, rng, width):
            y_new = m + (y - m) * a
            return y_new, y_new

        return _run_blocks(cfg, step0, init0, normals_per_step=0)

    df = 4.0 * alpha * m / k2
    scale = k2 * (1.0 - a) / (4.0 * alpha)

    def init(width, rng):
        y = np.full(width, cfg.r0)
        return y, y

    def step(y, z, rng, width):
        nc = y * a / scale
        y_new = scale * rng.noncentral_chisquare(df, nc)
        return y_new, y_new

    return _run_blocks(cfg, step, init, normals_per_step=0)


def simulate_lognormal(m_l: float, k2_l: float, y0: float, cfg: SimConfig) -> PathEnsemble:
    """Exact geometric stepping y *= exp((m - k^2/2) dt + k sqrt(dt) Z)."""
    if y0 <= 0:
        raise DataError("initial state must be positive")
    drift = (m_l - k2_l / 2.0) * cfg.dt
    vol = math.sqrt(k2_l * cfg.dt)

    def init(width, rng):
        y = np.full(width, y0)
        return y, y

    def step(y, z, rng, width):
        y_new = y * np.exp(drift + vol * z[0])
        return y_new, y_new

    return _run_blocks(cfg, step, init, normals_per_step=1)


def mc_discount(e: PathEnsemble, shift: float = 0.0) -> list[DiscountEstimate]:
    """Discount estimates D(t) = exp(-shift t) mean[exp(-integral)] per save time.

    The standard error is the sample standard error of the per-path
    exponential factors, scaled by the deterministic shift term.
    """
    n = e.integrals.shape[1]
    out = []
    for i, t in enumerate(e.times):
        factors = np.exp(-e.integrals[i] - shift * t)
        estimate = float(np.mean(factors))
        stderr = float(np.std(factors, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(DiscountEstimate(t=float(t), estimate=estimate, stderr=stderr))
    return out


def mc_negative_fraction(e: PathEnsemble) -> float:
    """Occupation fraction of r < 0 over the second half of the horizon,
    averaged over time and paths (the ergodic estimate of the stationary
    negative-rate probability; simulate past the transient first)."""
    window = e.config.horizon / 2.0
    return float(np.mean(e.neg_occupation_late)) / window


def mc_negative_fraction_stderr(e: PathEnsemble) -> float:
    """Across-path standard error of :func:`mc_negative_fraction`."""
    window = e.config.horizon / 2.0
    per_path = e.neg_occupation_late / window
    n = len(per_path)
    return float(np.std(per_path, ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def write_ensemble_csv(e: PathEnsemble, path) -> None:
    """Debug dump: one `path_id,t,integral` row per path and save time."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("path_id,t,integral\n")
        for pid in range(e.integrals.shape[1]):
            for i, t in enumerate(e.times):
                fh.write(f"{pid},{t:.17g},{e.integrals[i, pid]:.17g}\n")
