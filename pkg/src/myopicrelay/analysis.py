"""System-level results: outage, diversity-multiplexing tradeoff, floors.

The system outage at power P is the stationary average of the destination
outage over network states. The high-SNR diversity order equals the maximum
number of edge-disjoint source-destination paths through the always-active
relays, and when every relay is dual-mode the outage converges to a floor
determined only by (N, k, q).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .markov import build_matrix, stationary
from .model import NetworkConfig, state_space_size
from .outage import _outage_for_mask

__all__ = [
    "FlowGraph",
    "DmtCurve",
    "system_outage",
    "multi_branch_outage",
    "diversity_order",
    "dmt",
    "multi_branch_dmt",
    "outage_floor",
    "deployment_check",
    "estimate_slope",
]


def _destination_masks(config: NetworkConfig, m_states: int) -> np.ndarray:
    from .markov import _relay_masks  # shares the vectorized indicator logic
    from .model import beta_shift, lambda_shift

    n = config.n_relays
    j = n + 1
    codes = np.arange(m_states, dtype=np.int64)
    acc = np.zeros(m_states, dtype=np.int64)
    for i in config.feeders(j):
        if i == 0:
            acc |= 1
            continue
        ind = (codes >> beta_shift(config, i, j - i)) & 1
        if i in config.dual_mode:
            r = config.dual_mode.index(i)
            ind = ind & ((codes >> lambda_shift(config, r)) & 1)
        acc |= ind << i
    return acc


def system_outage(config: NetworkConfig, power: float, method: str = "exact") -> float:
    """System outage probability: sum_m pi_m * P_o(destination, m)."""
    _, m_states = state_space_size(config)
    tm = build_matrix(config, power, method=method)
    pi = stationary(tm).pi
    masks = _destination_masks(config, m_states)
    po = np.empty(m_states, dtype=float)
    for mask in np.unique(masks):
        po[masks == mask] = _outage_for_mask(
            config, config.n_relays + 1, int(mask), power, method
        )
    return float(pi @ po)


def multi_branch_outage(branches, power: float, method: str = "exact") -> float:
    """Outage of Z orthogonal branches with selection combining.

    The destination picks the best branch, so the system fails only when
    every branch fails: the product of the per-branch outages. Identical
    branch configurations are evaluated once.
    """
    branches = list(branches)
    if not branches:
        raise ValueError("need at least one branch")
    cache: dict[NetworkConfig, float] = {}
    total = 1.0
    for cfg in branches:
        if cfg not in cache:
            cache[cfg] = system_outage(cfg, power, method=method)
        total *= cache[cfg]
    return total


@dataclass(frozen=True)
class FlowGraph:
    """Directed acyclic flow graph over the always-active nodes.

    Nodes are the source, the relays outside the dual-mode set, and the
    destination; an edge i -> j exists for every retained pair with
    j - i <= k. All edges carry unit capacity.
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    source: int
    sink: int

    @classmethod
    def from_config(cls, config: NetworkConfig) -> "FlowGraph":
        n, k = config.n_relays, config.k_hops
        nodes = [0] + [i for i in range(1, n + 1) if i not in config.dual_mode] + [n + 1]
        edges = [
            (a, b)
            for ai, a in enumerate(nodes)
            for b in nodes[ai + 1 :]
            if 0 < b - a <= k
        ]
        return cls(nodes=tuple(nodes), edges=tuple(edges), source=0, sink=n + 1)

    def max_edge_disjoint_paths(self) -> int:
        """Max-flow with unit edge capacities via BFS augmentation."""
        residual: dict[int, dict[int, int]] = {v: {} for v in self.nodes}
        for a, b in self.edges:
            residual[a][b] = 1
            residual[b].setdefault(a, 0)
        flow = 0
        while True:
            parent = {self.source: None}
            queue = deque([self.source])
            while queue and self.sink not in parent:
                v = queue.popleft()
                for w, cap in residual[v].items():
                    if cap > 0 and w not in parent:
                        parent[w] = v
                        queue.append(w)
            if self.sink not in parent:
                return flow
            v = self.sink
            while parent[v] is not None:
                u = parent[v]
                residual[u][v] -= 1
                residual[v][u] += 1
                v = u
            flow += 1


def diversity_order(config: NetworkConfig) -> int:
    """Maximum diversity order of one branch.

    Counts the edge-disjoint source-destination paths that avoid every
    dual-mode relay; zero means the branch has an outage floor.
    """
    return FlowGraph.from_config(config).max_edge_disjoint_paths()


@dataclass(frozen=True)
class DmtCurve:
    """Linear diversity-multiplexing tradeoff delta(rho) = (1 - rho) delta0."""

    delta0: int

    def __call__(self, rho: float) -> float:
        if not 0.0 <= rho <= 1.0:
            raise ValueError("multiplexing gain rho must be in [0, 1]")
        return (1.0 - rho) * self.delta0


def dmt(config: NetworkConfig) -> DmtCurve:
    return DmtCurve(delta0=diversity_order(config))


def multi_branch_dmt(branches) -> DmtCurve:
    """DMT of orthogonal branches: per-branch diversity orders add up."""
    branches = list(branches)
    if not branches:
        raise ValueError("need at least one branch")
    return DmtCurve(delta0=sum(diversity_order(cfg) for cfg in branches))


@lru_cache(maxsize=None)
def _floor(n: int, k: int, q: float) -> float:
    if n == 0 and k == 0:
        # a stranded signal with no remaining forwarders and no direct link
        return 1.0
    if n == k:
        return q ** k
    return q ** k * _floor(n - 2, k - 1, q) + (1.0 - q ** k) * _floor(n - 1, k, q)


def outage_floor(n_relays: int, k_hops: int, q: float) -> float:
    """High-power outage floor when every relay is dual-mode.

    Valid for k <= N <= 2k: e(k, k) = q^k and
    e(N, k) = q^k e(N-2, k-1) + (1 - q^k) e(N-1, k) otherwise. Larger N and
    the direct-link case k = N + 1 are outside this recursion.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be a probability")
    if k_hops >= n_relays + 1:
        raise ValueError("no floor: a direct source-destination link exists")
    if not k_hops <= n_relays <= 2 * k_hops:
        raise ValueError("floor recursion requires k <= N <= 2k")
    return _floor(n_relays, k_hops, q)


def deployment_check(config: NetworkConfig, epsilon: int) -> bool:
    """Check the placement condition for target diversity order epsilon.

    Requires k - eps <= nu <= ceil(N / k) (k - eps) and that every window of
    k consecutive relays contains at most k - eps dual-mode relays.
    """
    n, k, nu = config.n_relays, config.k_hops, config.nu
    if not 1 <= epsilon <= k - 1:
        raise ValueError("epsilon must be in 1..k-1")
    budget = k - epsilon
    if not budget <= nu <= math.ceil(n / k) * budget:
        return False
    dual = set(config.dual_mode)
    width = min(k, n)
    for start in range(1, n - width + 2):
        window = range(start, start + width)
        if sum(1 for i in window if i in dual) > budget:
            return False
    return True


def estimate_slope(power_db, outage, window_db: tuple[float, float] = (25.0, 35.0)) -> float:
    """Empirical diversity order from a curve segment.

    Fits log10(outage) against log10(P) by least squares over the points
    with power_db inside window_db and returns the negated slope. Requires
    at least three points with strictly positive outage in the window.
    """
    p_db = np.asarray(power_db, dtype=float)
    out = np.asarray(outage, dtype=float)
    lo, hi = window_db
    sel = (p_db >= lo) & (p_db <= hi)
    if sel.sum() < 3:
        raise ValueError("need at least three curve points inside the window")
    if np.any(out[sel] <= 0.0):
        raise ValueError("outage must be positive throughout the window")
    log_p = p_db[sel] / 10.0  # log10 of the linear power
    log_out = np.log10(out[sel])
    slope = np.polyfit(log_p, log_out, 1)[0]
    return float(-slope)
