#!/usr/bin/env python3
"""Regenerate the synthetic fixtures under fixtures/.

Two synthetic countries:

* alphaland — annual observations 1880-2019, generated from a
  mean-reverting rate with (m, alpha, k2) = (0.03, 0.06, 1e-4).
* betaland — annual 1900-1979 then quarterly 1980Q1-2019Q4 (a frequency
  switch partway through), (m, alpha, k2) = (0.01, 0.25, 4e-4), plus one
  deliberately empty value cell to exercise gap filling.

Inflation inputs are constant per country, so after the ten-year forward
average the reconstructed real rate equals the simulated rate exactly:
yields are beta = exp(r + ln(1+C)) - 1 with C constant.

Deterministic: fixed seeds, stable formatting.  Run from the repo root:
    python3 scripts/generate_fixtures.py
"""

from __future__ import annotations

import json
import math
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def simulate_ou(m, alpha, k2, r0, deltas, seed):
    rng = np.random.default_rng(seed)
    r = [r0]
    for d in deltas:
        a = math.exp(-alpha * d)
        sd = math.sqrt(k2 * (1.0 - a * a) / (2.0 * alpha))
        r.append(m + (r[-1] - m) * a + sd * rng.standard_normal())
    return r


def annual_dates(start, end):
    return [f"{y}-12-31" for y in range(start, end + 1)]


def quarterly_dates(start, end):
    return [f"{y}Q{q}" for y in range(start, end + 1) for q in (1, 2, 3, 4)]


def write_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,value\n")
        for date, value in rows:
            fh.write(f"{date},{value}\n")


def make_country(name, dates, deltas, params, cpi_rate, seed, gap_at=None):
    m, alpha, k2 = params
    r = simulate_ou(m, alpha, k2, r0=m, deltas=deltas, seed=seed)
    i = math.log1p(cpi_rate)
    yield_rows = []
    for j, date in enumerate(dates):
        beta = math.exp(r[j] + i) - 1.0
        value = "" if j == gap_at else f"{beta:.12g}"
        yield_rows.append((date, value))
    cpi_rows = [(date, f"{cpi_rate:.12g}") for date in dates]
    write_csv(OUT / f"{name}_yields.csv", yield_rows)
    write_csv(OUT / f"{name}_cpi.csv", cpi_rows)


def main():
    OUT.mkdir(exist_ok=True)

    dates_a = annual_dates(1880, 2019)
    make_country(
        "alphaland",
        dates_a,
        [1.0] * (len(dates_a) - 1),
        params=(0.03, 0.06, 1e-4),
        cpi_rate=0.02,
        seed=20240101,
    )

    dates_b = annual_dates(1900, 1979) + quarterly_dates(1980, 2019)
    deltas_b = [1.0] * 80 + [0.25] * (len(dates_b) - 81)
    make_country(
        "betaland",
        dates_b,
        deltas_b,
        params=(0.01, 0.25, 4e-4),
        cpi_rate=0.03,
        seed=20240202,
        gap_at=40,  # one empty yield cell, mid-annual-era
    )

    manifest = [
        {"label": "alphaland", "yields_path": "alphaland_yields.csv", "cpi_path": "alphaland_cpi.csv"},
        {"label": "betaland", "yields_path": "betaland_yields.csv", "cpi_path": "betaland_cpi.csv"},
    ]
    with open(OUT / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
