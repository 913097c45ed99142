"""State transition matrix and stationary distribution of the buffer chain.

A transition from state m to state l exists iff every buffer's contents
shift one position to the right; the free coordinates of the new state are
the first cell of each buffer (decode outcome, governed by the per-node
outage probabilities of the from-state) and the mode bit of each dual-mode
relay (an independent Bernoulli draw). Columns index the from-state, so the
matrix is column stochastic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .model import (
    DEFAULT_STATE_CAP,
    NetworkConfig,
    beta,
    beta_shift,
    decode_state,
    incoming_mask,
    lambda_shift,
    state_space_size,
)
from .outage import _outage_for_mask

__all__ = [
    "TransitionMatrix",
    "StationaryDistribution",
    "StationaryError",
    "transition_exists",
    "transition_probability",
    "build_matrix",
    "stationary",
]

DENSE_SOLVE_THRESHOLD = 4096


class StationaryError(RuntimeError):
    """The stationary distribution could not be computed."""


def transition_exists(m: int, l: int, config: NetworkConfig) -> bool:
    """True iff beta_{i,m}[n] = beta_{i,l}[n+1] for all relays i, n < L_i."""
    sm = decode_state(m, config)
    sl = decode_state(l, config)
    for i in range(1, config.n_relays + 1):
        bm = beta(sm, config, i)
        bl = beta(sl, config, i)
        for n in range(len(bm) - 1):
            if bm[n] != bl[n + 1]:
                return False
    return True


def transition_probability(
    m: int, l: int, config: NetworkConfig, power: float, method: str = "exact"
) -> float:
    """Entry p_{l,m} of the transition matrix (0 if no transition exists)."""
    if not transition_exists(m, l, config):
        return 0.0
    sm = decode_state(m, config)
    sl = decode_state(l, config)
    q = config.q_silent
    prob = 1.0
    for r in range(config.nu):
        lam = sl.relay_bits[r]
        prob *= (1.0 - q) if lam else q
    for j in range(1, config.n_relays + 1):
        po = _outage_for_mask(config, j, incoming_mask(j, sm, config), power, method)
        first = beta(sl, config, j)[0]
        prob *= (1.0 - po) if first else po
    return prob


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Column-stochastic transition matrix stored sparsely by column.

    Each column holds exactly 2^(nu + N) structural entries (one per
    combination of the free bits). degenerate is set when any per-node
    outage used in the construction is exactly 0 or 1, which happens in the
    boundary power regimes; the stationary solver then skips the
    irreducibility assertion and uses the iterative path.
    """

    config: NetworkConfig
    power: float
    method: str
    matrix: sparse.csc_array
    degenerate: bool

    @property
    def m_states(self) -> int:
        return self.matrix.shape[0]

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def structural_entries_per_column(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entry(self, l: int, m: int) -> float:
        """p_{l,m} with 1-based state indices."""
        return float(self.matrix[l - 1, m - 1])


def _relay_masks(config: NetworkConfig, codes: np.ndarray) -> np.ndarray:
    """Incoming active-transmitter mask of every relay for all states.

    Returns an (M, N) integer array; bit i of masks[c, j-1] is set iff node
    i transmits to relay j in the state with code c.
    """
    n = config.n_relays
    masks = np.zeros((codes.size, n), dtype=np.int64)
    for j in range(1, n + 1):
        acc = np.zeros(codes.size, dtype=np.int64)
        for i in config.feeders(j):
            if i == 0:
                acc |= 1
                continue
            ind = (codes >> beta_shift(config, i, j - i)) & 1
            if i in config.dual_mode:
                r = config.dual_mode.index(i)
                ind = ind & ((codes >> lambda_shift(config, r)) & 1)
            acc |= ind << i
        masks[:, j - 1] = acc
    return masks


def build_matrix(
    config: NetworkConfig,
    power: float,
    method: str = "exact",
    cap: int = DEFAULT_STATE_CAP,
) -> TransitionMatrix:
    """Construct the full transition matrix at transmit power P.

    Per-node outage probabilities are computed once per (receiver,
    incoming-link mask) and reused across all states that share the mask.
    """
    _, m_states = state_space_size(config, cap=cap)
    n, nu = config.n_relays, config.nu
    codes = np.arange(m_states, dtype=np.int64)

    # shifted buffer bits: every beta_i[n] -> beta_i[n+1] moves one bit
    # toward the LSB, so a single masked right-shift realizes all of them
    src_mask = 0
    for i in range(1, n + 1):
        for cell in range(1, config.buffer_sizes[i - 1]):
            src_mask |= 1 << beta_shift(config, i, cell)
    shifted = (codes & src_mask) >> 1

    masks = _relay_masks(config, codes)
    po = np.empty((m_states, n), dtype=float)
    degenerate = False
    for j in range(1, n + 1):
        col = masks[:, j - 1]
        for mask in np.unique(col):
            val = _outage_for_mask(config, j, int(mask), power, method)
            po[col == mask, j - 1] = val
            if val == 0.0 or val == 1.0:
                degenerate = True

    # free bits: lambda of each dual-mode relay, then beta_j[1] of each relay
    free_shifts = [lambda_shift(config, r) for r in range(nu)]
    free_shifts += [beta_shift(config, j, 1) for j in range(1, n + 1)]
    n_free = nu + n
    n_combo = 1 << n_free
    combos = np.arange(n_combo, dtype=np.int64)
    combo_bits = np.array([(combos >> f) & 1 for f in range(n_free)], dtype=np.int64)
    combo_add = np.zeros(n_combo, dtype=np.int64)
    for f, shift in enumerate(free_shifts):
        combo_add |= combo_bits[f] << shift

    q = config.q_silent
    probs = np.ones((m_states, n_combo), dtype=float)
    for r in range(nu):
        on = combo_bits[r].astype(bool)
        probs *= np.where(on, 1.0 - q, q)[None, :]
    for j in range(1, n + 1):
        on = combo_bits[nu + j - 1].astype(bool)[None, :]
        pj = po[:, j - 1][:, None]
        probs *= np.where(on, 1.0 - pj, pj)

    # identical combo order in every column; sort once by target offset
    order = np.argsort(combo_add, kind="stable")
    combo_add = combo_add[order]
    probs = probs[:, order]

    rows = (shifted[:, None] | combo_add[None, :]).ravel()
    data = probs.ravel()
    indptr = np.arange(m_states + 1, dtype=np.int64) * n_combo
    mat = sparse.csc_array((data, rows, indptr), shape=(m_states, m_states))
    return TransitionMatrix(
        config=config, power=power, method=method, matrix=mat, degenerate=degenerate
    )


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """Stationary vector pi with its residual max |A pi - pi|."""

    pi: np.ndarray
    residual: float
    method: str
    iterations: int

    @property
    def support(self) -> np.ndarray:
        """1-based indices of states carrying stationary mass."""
        return np.flatnonzero(self.pi > 1e-12) + 1


def assert_irreducible(tm: TransitionMatrix) -> None:
    """Check strong connectivity of the nonzero pattern and p_{1,1} > 0."""
    n_comp, _ = connected_components(tm.matrix, directed=True, connection="strong")
    if n_comp != 1:
        raise StationaryError(f"transition graph has {n_comp} strong components")
    if tm.entry(1, 1) <= 0.0:
        raise StationaryError("p_{1,1} is not positive")


def _finalize(pi: np.ndarray, mat: sparse.csc_array, method: str, iterations: int):
    if pi.min() < -1e-12:
        raise StationaryError(f"stationary vector has entry {pi.min():.3e} < -1e-12")
    pi = np.clip(pi, 0.0, None)
    total = pi.sum()
    if abs(total - 1.0) > 1e-10:
        raise StationaryError(f"stationary vector sums to {total!r}")
    residual = float(np.abs(mat @ pi - pi).max())
    if residual > 1e-10:
        raise StationaryError(f"stationary residual {residual:.3e} above 1e-10")
    return StationaryDistribution(pi=pi, residual=residual, method=method, iterations=iterations)


def _power_iteration(mat: sparse.csc_array, tol: float, max_iter: int):
    m = mat.shape[0]
    pi = np.full(m, 1.0 / m)
    for it in range(1, max_iter + 1):
        pi = mat @ pi
        pi /= pi.sum()
        if np.abs(mat @ pi - pi).max() <= tol:
            return pi, it
    raise StationaryError(f"power iteration did not converge in {max_iter} steps")


def stationary(
    tm: TransitionMatrix,
    dense_threshold: int = DENSE_SOLVE_THRESHOLD,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    force_method: str | None = None,
) -> StationaryDistribution:
    """Solve for the stationary distribution of a built transition matrix.

    Small chains are solved directly through the rank-repaired linear system
    (A - I + ones) pi = ones; larger or degenerate chains fall back to power
    iteration normalized each step. Both paths must reach a residual of at
    most 1e-10.
    """
    mat = tm.matrix
    m = mat.shape[0]
    use_direct = m <= dense_threshold and not tm.degenerate
    if force_method == "direct":
        use_direct = True
    elif force_method == "power":
        use_direct = False
    if use_direct:
        dense = mat.toarray()
        system = dense - np.eye(m) + 1.0
        try:
            pi = np.linalg.solve(system, np.ones(m))
        except np.linalg.LinAlgError as exc:
            if tm.degenerate:
                pi, it = _power_iteration(mat, 0.5 * tol, max_iter)
                return _finalize(pi, mat, "power", it)
            raise StationaryError("singular stationary system; chain not unichain") from exc
        return _finalize(pi, mat, "direct", 1)
    pi, it = _power_iteration(mat, 0.5 * tol, max_iter)
    return _finalize(pi, mat, "power", it)
