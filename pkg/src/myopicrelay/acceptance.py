"""Acceptance suite: every release gate as an executable check.

Each criterion reports one row (id, measured, bound, pass). Composite
criteria normalize their sub-checks to worst-ratio form, so measured <=
bound always decides the pass. The tolerance_scale hook multiplies every
bound, which lets a harness verify that perturbed tolerances flip the
outcome. All seeds, grids and slot counts are pinned here.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .analysis import diversity_order, estimate_slope, multi_branch_outage, outage_floor, system_outage
from .configio import db_to_linear
from .markov import build_matrix, stationary
from .model import NetworkConfig, decode_state, state_space_size
from .optimize import optimize_splits
from .outage import LinkPattern, conventional_benchmark, outage_gil_pelaez, outage_per_node, outage_single_link
from .simulate import occupancy_histogram, run as run_simulation

__all__ = ["CheckRow", "run_acceptance", "run_criterion", "format_row", "CRITERIA"]

SLOTS = 1_000_000
SEED = 987_654_321
GRID_DB = tuple(float(x) for x in range(0, 45, 5))
SLOPE_GRID_DB = (25.0, 27.5, 30.0, 32.5, 35.0)


@dataclass(frozen=True)
class CheckRow:
    criterion: int
    name: str
    measured: float
    bound: float
    passed: bool
    detail: str = ""
    runtime_s: float = 0.0


def format_row(row: CheckRow) -> str:
    status = "PASS" if row.passed else "FAIL"
    text = (
        f"{status} C{row.criterion:02d} {row.name}: "
        f"measured={row.measured:.6g} bound={row.bound:.6g}"
    )
    if row.detail:
        text += f" [{row.detail}]"
    return text + f" ({row.runtime_s:.1f}s)"


def _base_config(n, k, dual=(), q=0.1, splits=()):
    return NetworkConfig(
        n_relays=n, k_hops=k, dual_mode=dual, q_silent=q,
        end_distance=3.0, eta=2.0, sigma2=1.0, gamma=1.0, splits=splits,
    )


def _label(cfg: NetworkConfig) -> str:
    dual = "".join(str(i) for i in cfg.dual_mode) or "-"
    return f"N{cfg.n_relays}k{cfg.k_hops}H{dual}"


def _matrix_sanity_configs():
    cfgs = [_base_config(2, k, dual) for k in (1, 2, 3) for dual in ((), (1,), (2,), (1, 2))]
    cfgs += [_base_config(3, 2, dual) for dual in ((), (1,), (1, 2), (1, 3))]
    return cfgs


def _analytic_curve(cfg: NetworkConfig, grid_db) -> np.ndarray:
    return np.array([system_outage(cfg, db_to_linear(p)) for p in grid_db])


def _crossing_db(p_db, outage, level):
    """Power (dB) where a decreasing outage curve crosses `level`."""
    logs = np.log10(np.asarray(outage))
    target = math.log10(level)
    for i in range(len(logs) - 1):
        if logs[i] >= target >= logs[i + 1]:
            frac = (logs[i] - target) / (logs[i] - logs[i + 1])
            return p_db[i] + frac * (p_db[i + 1] - p_db[i])
    raise ValueError(f"curve does not cross {level} inside the grid")


# -- criterion 1: Gil-Pelaez vs the single-link exponential form ------------

def criterion_1(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    worst = 0.0
    for w in np.logspace(-1.0, 1.0, 20):
        for tau in np.logspace(-4.0, 1.0, 20):
            pattern = LinkPattern(1, (0,), (float(w),), float(tau))
            delta = abs(outage_gil_pelaez(pattern) - outage_single_link(w, tau))
            worst = max(worst, delta)
    dt = time.perf_counter() - t0
    bound = 1e-6 * scale
    passed = worst <= bound and dt < 10.0
    return CheckRow(1, "gil-pelaez-matches-single-link", worst, bound, passed,
                    detail="20x20 grid, runtime bound 10 s", runtime_s=dt)


# -- criterion 2: Gil-Pelaez vs a 1e7-sample Rayleigh-sum Monte Carlo -------

def _mc_sum_outage(n_terms: int, threshold: float, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    scale = math.sqrt(0.5)
    hits = 0
    left = samples
    while left > 0:
        n = min(2_500_000, left)
        sums = rng.rayleigh(scale, size=(n, n_terms)).sum(axis=1)
        hits += int((sums < threshold).sum())
        left -= n
    p = hits / samples
    se = math.sqrt(max(p * (1 - p), 1e-300) / samples)
    return p, se


def criterion_2(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    worst = 0.0
    details = []
    samples = 10_000_000
    for c_terms in (2, 3):
        for tau in (0.1, 1.0, 3.0):
            pattern = LinkPattern(1, tuple(range(c_terms)), (1.0,) * c_terms, tau)
            exact = outage_gil_pelaez(pattern)
            mc, se = _mc_sum_outage(c_terms, math.sqrt(tau), samples, SEED + c_terms * 10 + int(tau * 10))
            ratio = abs(exact - mc) / (3.0 * se)
            worst = max(worst, ratio)
            details.append(f"C={c_terms} tau={tau}: {ratio:.2f}")
    dt = time.perf_counter() - t0
    passed = worst <= 1.0 * scale and dt < 120.0
    return CheckRow(2, "gil-pelaez-within-3se-of-monte-carlo", worst, 1.0 * scale,
                    passed, detail="; ".join(details), runtime_s=dt)


# -- criterion 3: matrix and stationary sanity over the config battery ------

def criterion_3(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    worst = 0.0
    worst_what = ""
    for cfg in _matrix_sanity_configs():
        for p_db in (5.0, 15.0, 25.0):
            tm = build_matrix(cfg, db_to_linear(p_db))
            checks = {
                "colsum": np.abs(tm.column_sums() - 1.0).max() / 1e-12,
                "entries": tm.structural_entries_per_column().max()
                / 2 ** (cfg.nu + cfg.n_relays),
            }
            st = stationary(tm)
            checks["residual"] = st.residual / 1e-10
            checks["pi-sum"] = abs(st.pi.sum() - 1.0) / 1e-10
            for what, ratio in checks.items():
                if ratio > worst:
                    worst, worst_what = ratio, f"{what} {_label(cfg)} P={p_db}"
    dt = time.perf_counter() - t0
    return CheckRow(3, "matrix-and-stationary-sanity", worst, 1.0 * scale,
                    worst <= 1.0 * scale, detail=f"worst: {worst_what}", runtime_s=dt)


# -- criterion 4: analytic curve inside the simulation 99% CI ---------------

def criterion_4(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    worst = 0.0
    worst_what = ""
    compared = 0
    for cfg_idx, cfg in enumerate(_matrix_sanity_configs()):
        for idx, p_db in enumerate(GRID_DB):
            power = db_to_linear(p_db)
            analytic = system_outage(cfg, power)
            if analytic <= 1e-3:
                continue
            res = run_simulation(cfg, power, SLOTS, seed=SEED + 1000 * cfg_idx + idx)
            ratio = abs(analytic - res.outage_probability) / res.ci_halfwidth
            compared += 1
            if ratio > worst:
                worst, worst_what = ratio, f"{_label(cfg)} P={p_db}"
    dt = time.perf_counter() - t0
    passed = worst <= 1.0 * scale and dt < 600.0
    return CheckRow(4, "analytic-inside-simulation-ci", worst, 1.0 * scale, passed,
                    detail=f"{compared} comparisons, worst: {worst_what}", runtime_s=dt)


# -- criterion 5: stationary-average outage equals the 4-term closed form ---

def criterion_5(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    cfg = _base_config(2, 2, ())
    worst = 0.0
    for p_db in GRID_DB:
        power = db_to_linear(p_db)
        po = {m: [outage_per_node(j, decode_state(m, cfg), cfg, power) for j in (1, 2, 3)]
              for m in range(1, 9)}
        p1 = po[1][0]
        p2_empty, p2_full = po[1][1], po[5][1]
        closed = (
            p1 * p2_empty
            + p1 * (1.0 - p2_empty) * po[2][2]
            + (1.0 - p1) * p2_full * po[3][2]
            + (1.0 - p1) * (1.0 - p2_full) * po[4][2]
        )
        worst = max(worst, abs(system_outage(cfg, power) - closed))
    dt = time.perf_counter() - t0
    return CheckRow(5, "worked-example-identity", worst, 1e-12 * scale,
                    worst <= 1e-12 * scale, runtime_s=dt)


# -- criterion 6: outage floor value and simulation at 40 dB ----------------

def criterion_6(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    ratios = {}
    ratios["floor-value"] = abs(outage_floor(2, 2, 0.1) - 0.01) / 1e-12
    for q, floor in ((0.1, 0.01), (0.5, 0.25)):
        cfg = _base_config(2, 2, (1, 2), q=q)
        res = run_simulation(cfg, db_to_linear(40.0), SLOTS, seed=SEED + int(q * 100))
        ratios[f"sim-q{q}"] = abs(res.outage_probability / floor - 1.0) / 0.10
    worst_what = max(ratios, key=ratios.get)
    worst = ratios[worst_what]
    dt = time.perf_counter() - t0
    return CheckRow(6, "outage-floor", worst, 1.0 * scale, worst <= 1.0 * scale,
                    detail=f"worst: {worst_what}", runtime_s=dt)


# -- criterion 7: diversity slopes of the analytic curves -------------------

def criterion_7(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    ratios = {}
    for k in (1, 2, 3):
        cfg = _base_config(2, k, ())
        curve = _analytic_curve(cfg, SLOPE_GRID_DB)
        est = estimate_slope(SLOPE_GRID_DB, curve, (25.0, 35.0))
        ratios[f"k{k}"] = abs(est - k) / 0.3
    cfg = _base_config(3, 2, (1, 3))
    curve = _analytic_curve(cfg, SLOPE_GRID_DB)
    ratios["N3k2H13"] = abs(estimate_slope(SLOPE_GRID_DB, curve, (25.0, 35.0)) - 1.0) / 0.3
    floor_grid = (35.0, 37.5, 40.0, 42.5, 45.0)
    cfg = _base_config(2, 2, (1, 2))
    curve = _analytic_curve(cfg, floor_grid)
    est = estimate_slope(floor_grid, curve, (35.0, 45.0))
    ratios["floor-flat"] = est / 0.1  # slope must stay above -0.1
    worst_what = max(ratios, key=ratios.get)
    worst = ratios[worst_what]
    dt = time.perf_counter() - t0
    return CheckRow(7, "diversity-slopes", worst, 1.0 * scale, worst <= 1.0 * scale,
                    detail=f"worst: {worst_what}", runtime_s=dt)


# -- criterion 8: coding gain of k=2 over k=1 at outage 1e-2 -----------------

def criterion_8(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    grid1 = tuple(float(x) for x in range(16, 33, 2))
    cfg1 = _base_config(2, 1, ())
    cross1 = _crossing_db(grid1, _analytic_curve(cfg1, grid1), 1e-2)
    grid2 = tuple(float(x) for x in range(8, 25, 2))
    cfg2 = _base_config(2, 2, ())
    curve2 = [
        optimize_splits(cfg2, db_to_linear(p), seed=SEED).outage for p in grid2
    ]
    cross2 = _crossing_db(grid2, curve2, 1e-2)
    gap = cross1 - cross2
    dt = time.perf_counter() - t0
    return CheckRow(8, "k2-vs-k1-coding-gain", abs(gap - 8.0), 2.0 * scale,
                    abs(gap - 8.0) <= 2.0 * scale,
                    detail=f"gap={gap:.2f} dB (k1 at {cross1:.2f}, k2 at {cross2:.2f})",
                    runtime_s=dt)


# -- criterion 9: conventional multi-hop benchmark stays above all curves ---

def criterion_9(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    worst = 0.0
    worst_what = ""
    for n in (2, 3):
        for k in range(1, n + 2):
            cfg = _base_config(n, k, ())
            for p_db in GRID_DB:
                power = db_to_linear(p_db)
                ratio = system_outage(cfg, power) / conventional_benchmark(cfg, power)
                if ratio > worst:
                    worst, worst_what = ratio, f"{_label(cfg)} P={p_db}"
    dt = time.perf_counter() - t0
    return CheckRow(9, "benchmark-ordering", worst, 1.0 * scale, worst < 1.0 * scale,
                    detail=f"worst: {worst_what}", runtime_s=dt)


# -- criterion 10: two identical branches square the outage, double slope ---

def criterion_10(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    cfg = _base_config(2, 2, ())
    worst_sq = 0.0
    for p_db in GRID_DB:
        power = db_to_linear(p_db)
        single = system_outage(cfg, power)
        double = multi_branch_outage([cfg, cfg], power)
        worst_sq = max(worst_sq, abs(double - single ** 2) / max(single ** 2, 1e-300))
    curve = _analytic_curve(cfg, SLOPE_GRID_DB) ** 2
    est = estimate_slope(SLOPE_GRID_DB, curve, (25.0, 35.0))
    ratios = {"square": worst_sq / 1e-15, "slope": abs(est - 4.0) / 0.5}
    worst_what = max(ratios, key=ratios.get)
    worst = ratios[worst_what]
    dt = time.perf_counter() - t0
    return CheckRow(10, "multi-branch-square-and-slope", worst, 1.0 * scale,
                    worst <= 1.0 * scale, detail=f"worst: {worst_what}, slope={est:.2f}",
                    runtime_s=dt)


# -- criterion 11: optimizer dominance over the equal split -----------------

def criterion_11(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    ratios = {}
    for k in (2, 3):
        cfg = _base_config(2, k, ())
        for p_db in (5.0, 10.0, 15.0, 20.0, 25.0, 30.0):
            power = db_to_linear(p_db)
            equal = system_outage(cfg, power)
            opt = optimize_splits(cfg, power, seed=SEED).outage
            name = f"k{k}-P{p_db:g}"
            ratios[f"{name}-dominates"] = (opt - equal) / 1e-10
            if p_db <= 10.0:
                gain = equal - opt
                ratios[f"{name}-strict"] = 1e-12 / gain if gain > 0 else math.inf
            if p_db >= 25.0:
                ratios[f"{name}-high-snr"] = ((equal - opt) / equal) / 0.02
    worst_what = max(ratios, key=ratios.get)
    worst = ratios[worst_what]
    dt = time.perf_counter() - t0
    return CheckRow(11, "optimizer-dominance", worst, 1.0 * scale, worst <= 1.0 * scale,
                    detail=f"worst: {worst_what}", runtime_s=dt)


# -- criterion 12: occupancy histogram matches the stationary vector --------

def criterion_12(scale: float) -> CheckRow:
    t0 = time.perf_counter()
    worst = 0.0
    worst_what = ""
    for dual in ((), (1, 2)):
        cfg = _base_config(2, 2, dual)
        _, m_states = state_space_size(cfg)
        for p_db in (10.0, 20.0):
            power = db_to_linear(p_db)
            pi = stationary(build_matrix(cfg, power)).pi
            occ = occupancy_histogram(cfg, power, SLOTS, seed=SEED + int(p_db))
            binom = np.sqrt(np.clip(pi * (1.0 - pi), 0.0, None) / SLOTS)
            se = np.maximum(occ.standard_error, binom)
            ratio = float((np.abs(occ.frequencies - pi) / (3.0 * se)).max())
            if ratio > worst:
                worst, worst_what = ratio, f"{_label(cfg)} P={p_db}"
    dt = time.perf_counter() - t0
    return CheckRow(12, "occupancy-matches-stationary", worst, 1.0 * scale,
                    worst <= 1.0 * scale, detail=f"worst: {worst_what}", runtime_s=dt)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}


def run_criterion(number: int, tolerance_scale: float = 1.0) -> CheckRow:
    return CRITERIA[number](tolerance_scale)


def run_acceptance(criteria=None, tolerance_scale: float = 1.0):
    """Run the selected criteria (default all); returns (rows, all_passed)."""
    numbers = sorted(CRITERIA) if criteria is None else list(criteria)
    rows = [run_criterion(n, tolerance_scale) for n in numbers]
    return rows, all(r.passed for r in rows)
