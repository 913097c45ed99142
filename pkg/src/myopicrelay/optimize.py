"""Numerical minimization of the system outage over the power splits.

The decision variables are the per-transmitter weights a_{i,j}, constrained
to the open simplex (each transmitter's weights sum to one, all strictly
inside (0, 1)), with every dual-mode relay forced active (q = 0). The
objective composes a quadrature and a linear solve, so a derivative-free
simplex search over unconstrained coordinates is used, restarted from the
equal split plus a few perturbed points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .analysis import system_outage
from .model import NetworkConfig, equal_split_table

__all__ = ["SplitSolution", "equal_splits", "optimize_splits"]

DEFAULT_WEIGHT_FLOOR = 1e-4


def equal_splits(config: NetworkConfig) -> tuple[tuple[float, ...], ...]:
    """Uniform weights a_{i,j} = 1 / min(k, N - i + 1) per transmitter."""
    return equal_split_table(config.n_relays, config.k_hops)


@dataclass(frozen=True)
class SplitSolution:
    """Optimized weight table with the achieved outage and search metadata."""

    splits: tuple[tuple[float, ...], ...]
    outage: float
    iterations: int
    converged: bool
    start_index: int


def _free_rows(table) -> list[int]:
    return [i for i, row in enumerate(table) if len(row) > 1]


def _softmax_to_table(params, template, floor):
    """Map unconstrained coordinates to the interior of each simplex.

    Each transmitter with L >= 2 receivers gets L - 1 free coordinates (the
    first logit is pinned to zero); weights are floor + (1 - L floor) *
    softmax, so they stay in (floor, 1 - floor) and sum to one exactly.
    """
    table = []
    pos = 0
    for row in template:
        l = len(row)
        if l == 1:
            table.append((1.0,))
            continue
        logits = np.concatenate([[0.0], params[pos : pos + l - 1]])
        pos += l - 1
        logits -= logits.max()
        w = np.exp(logits)
        w /= w.sum()
        w = floor + (1.0 - l * floor) * w
        table.append(tuple(float(x) for x in w))
    return tuple(table)


def _projected_to_table(params, template, floor):
    """Alternative mapping: raw coordinates projected onto the simplex interior."""
    table = []
    pos = 0
    for row in template:
        l = len(row)
        if l == 1:
            table.append((1.0,))
            continue
        raw = np.maximum(np.abs(params[pos : pos + l]), floor)
        pos += l
        w = raw / raw.sum()
        w = floor + (1.0 - l * floor) * w / w.sum()
        table.append(tuple(float(x) for x in w))
    return tuple(table)


def optimize_splits(
    config: NetworkConfig,
    power: float,
    n_starts: int = 5,
    seed: int = 0,
    method: str = "exact",
    parameterization: str = "softmax",
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    maxiter: int | None = None,
) -> SplitSolution:
    """Minimize the system outage over the power splits at one power level.

    Every dual-mode relay is forced active for the search (q = 0). The
    returned outage never exceeds the equal-split outage: the equal split is
    both the first start and the incumbent. Deterministic for a fixed seed;
    ties between starts resolve to the lowest start index.
    """
    base = replace(config, q_silent=0.0)
    template = equal_splits(base)
    free = _free_rows(template)
    to_table = {
        "softmax": _softmax_to_table,
        "projected": _projected_to_table,
    }[parameterization]
    if parameterization == "softmax":
        dim = sum(len(template[i]) - 1 for i in free)
        center = np.zeros(dim)
    else:
        dim = sum(len(template[i]) for i in free)
        center = np.concatenate([np.array(template[i]) for i in free]) if free else np.zeros(0)

    def objective(params):
        table = to_table(params, template, weight_floor)
        return system_outage(base.with_splits(table), power, method=method)

    equal_outage = objective(center)
    if dim == 0:
        # every transmitter has a single receiver: nothing to optimize
        return SplitSolution(
            splits=template, outage=equal_outage, iterations=0, converged=True, start_index=0
        )

    rng = np.random.default_rng(seed)
    starts = [center] + [center + rng.normal(0.0, 0.6, size=dim) for _ in range(n_starts - 1)]
    # the equal split is the incumbent, so the result can never be worse
    best_outage, best_table = equal_outage, to_table(center, template, weight_floor)
    best_iter, best_idx, best_ok = 0, 0, True
    for idx, x0 in enumerate(starts):
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": 1e-4,
                "fatol": equal_outage * 1e-6 + 1e-15,
                "maxiter": maxiter or 200 * dim,
            },
        )
        if res.fun < best_outage:
            best_outage = float(res.fun)
            best_table = to_table(res.x, template, weight_floor)
            best_iter, best_idx, best_ok = int(res.nit), idx, bool(res.success)
    return SplitSolution(
        splits=best_table,
        outage=best_outage,
        iterations=best_iter,
        converged=best_ok,
        start_index=best_idx,
    )
