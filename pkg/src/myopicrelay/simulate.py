"""Time-slotted Monte Carlo simulator of the k-hop myopic relay protocol.

Each slot performs, in order: transmission (every dual-mode relay's current
mode and every buffer cell decide which links carry a signal), the shift of
every buffer one cell to the right, and decoding into the freed first cell
(occupied iff the coherently combined SNR clears the threshold and at least
one signal arrived). Destination decode failures are tallied as outages.

Internally the simulator packs each replica's state into the same integer
code used by the Markov analysis and steps many independent replicas in
lockstep with vectorized draws, which keeps a million-slot run well under a
second. Results are reproducible: identical (config, P, slots, seed) give
bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .model import (
    DEFAULT_STATE_CAP,
    NetworkConfig,
    beta_shift,
    lambda_shift,
    state_space_size,
)

__all__ = [
    "SimState",
    "SimResult",
    "OccupancyResult",
    "initial_state",
    "step",
    "run",
    "occupancy_histogram",
    "transition_frequencies",
]

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile
_BLOCK_SLOTS = 256  # RNG draws are batched this many slots at a time


class _VectorEngine:
    """Precomputed bit layout and link tables for stepping packed states."""

    def __init__(self, config: NetworkConfig, power: float, shift_before_decode: bool = True):
        self.config = config
        self.power = power
        self.shift_before_decode = shift_before_decode
        n, k = config.n_relays, config.k_hops
        self.n_relays = n
        self.nu = config.nu
        self.q = config.q_silent
        self.threshold = math.sqrt(config.tau(power))

        b_shifts, lam_shifts, is_source, weights, seg_starts = [], [], [], [], []
        for j in range(1, n + 2):
            seg_starts.append(len(weights))
            for i in config.feeders(j):
                weights.append(config.link_weight(i, j))
                if i == 0:
                    is_source.append(True)
                    b_shifts.append(0)
                    lam_shifts.append(-1)
                else:
                    is_source.append(False)
                    b_shifts.append(beta_shift(config, i, j - i))
                    if i in config.dual_mode:
                        lam_shifts.append(lambda_shift(config, config.dual_mode.index(i)))
                    else:
                        lam_shifts.append(-1)
        self.b_shifts = np.array(b_shifts, dtype=np.int64)
        self.lam_shifts = np.array(lam_shifts, dtype=np.int64)
        self.is_source = np.array(is_source, dtype=bool)
        self.has_lam = self.lam_shifts >= 0
        self.weights = np.array(weights, dtype=float)
        self.seg_starts = np.array(seg_starts, dtype=np.int64)
        self.n_links = len(weights)

        src_mask = 0
        for i in range(1, n + 1):
            for cell in range(1, config.buffer_sizes[i - 1]):
                src_mask |= 1 << beta_shift(config, i, cell)
        self.src_mask = np.int64(src_mask)
        self.first_mask = np.int64(
            sum(1 << beta_shift(config, j, 1) for j in range(1, n + 1))
        )
        self.first_pow2 = np.array(
            [1 << beta_shift(config, j, 1) for j in range(1, n + 1)], dtype=np.int64
        )
        self.lam_pow2 = np.array(
            [1 << lambda_shift(config, r) for r in range(config.nu)], dtype=np.int64
        )

    def initial_codes(self, n_replicas: int, rng: np.random.Generator) -> np.ndarray:
        """All buffers empty; the mode of each dual-mode relay is sampled."""
        codes = np.zeros(n_replicas, dtype=np.int64)
        if self.nu:
            active = rng.random((n_replicas, self.nu)) < (1.0 - self.q)
            codes |= active.astype(np.int64) @ self.lam_pow2
        return codes

    def step_codes(self, codes: np.ndarray, exp_draws: np.ndarray, mode_draws):
        """Advance one slot; returns (new_codes, destination_decoded)."""
        ind = (codes[:, None] >> self.b_shifts) & 1
        ind[:, self.is_source] = 1
        lam_ok = (codes[:, None] >> np.maximum(self.lam_shifts, 0)) & 1
        lam_ok[:, ~self.has_lam] = 1
        ind &= lam_ok
        amps = np.sqrt(exp_draws * self.weights)
        sums = np.add.reduceat(amps * ind, self.seg_starts, axis=1)
        counts = np.add.reduceat(ind, self.seg_starts, axis=1)
        success = (counts > 0) & (sums >= self.threshold)

        relay_bits = success[:, : self.n_relays].astype(np.int64) @ self.first_pow2
        if self.shift_before_decode:
            new_codes = ((codes & self.src_mask) >> 1) | relay_bits
        else:
            # deliberate wrong phase order for the mutation self-check:
            # decode lands in the first cell and is immediately shifted away
            decoded = (codes & ~self.first_mask) | relay_bits
            new_codes = (decoded & self.src_mask) >> 1
        if self.nu:
            active = mode_draws < (1.0 - self.q)
            new_codes |= active.astype(np.int64) @ self.lam_pow2
        return new_codes, success[:, self.n_relays]


@lru_cache(maxsize=64)
def _engine(config: NetworkConfig, power: float, shift_before_decode: bool = True) -> _VectorEngine:
    return _VectorEngine(config, power, shift_before_decode)


def _default_warmup(config: NetworkConfig) -> int:
    # the first message needs N+1 slots end to end, plus k to fill the pipeline
    return config.n_relays + config.k_hops


def _replica_count(slots: int) -> int:
    return min(64, max(1, slots // 8192))


def _run_engine(
    config: NetworkConfig,
    power: float,
    slots: int,
    seed: int,
    warmup: int | None,
    track_occupancy: bool,
    shift_before_decode: bool = True,
):
    eng = _engine(config, power, shift_before_decode)
    warm = _default_warmup(config) if warmup is None else int(warmup)
    n_rep = _replica_count(slots)
    base, extra = divmod(slots, n_rep)
    per_replica = np.full(n_rep, base, dtype=np.int64)
    per_replica[:extra] += 1
    max_steps = warm + int(per_replica.max())

    rng = np.random.default_rng(seed)
    codes = eng.initial_codes(n_rep, rng)
    outages = np.zeros(n_rep, dtype=np.int64)
    occ = None
    if track_occupancy:
        _, m_states = state_space_size(config)
        occ = np.zeros((n_rep, m_states), dtype=np.int64)
    rep_idx = np.arange(n_rep)

    done = 0
    while done < max_steps:
        block = min(_BLOCK_SLOTS, max_steps - done)
        exp_draws = rng.standard_exponential((block, n_rep, eng.n_links))
        mode_draws = rng.random((block, n_rep, eng.nu)) if eng.nu else None
        for b in range(block):
            t = done + b
            counted = None
            if t >= warm:
                counted = (t - warm) < per_replica
                if track_occupancy:
                    np.add.at(occ, (rep_idx[counted], codes[counted]), 1)
            codes, dest_ok = eng.step_codes(
                codes, exp_draws[b], mode_draws[b] if eng.nu else None
            )
            if counted is not None:
                outages += (~dest_ok) & counted
        done += block
    return outages, per_replica, occ


@dataclass(frozen=True)
class SimResult:
    """Outcome of a simulation run with a binomial-variance 99% interval."""

    slots: int
    warmup: int
    replicas: int
    seed: int
    outage_count: int
    decoded_count: int
    outage_probability: float
    ci_halfwidth: float
    ci_low: float
    ci_high: float
    replica_outages: tuple[int, ...]
    replica_slots: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class OccupancyResult:
    """Empirical state-occupancy frequencies with a cross-replica SE."""

    slots: int
    replicas: int
    counts: np.ndarray
    frequencies: np.ndarray
    standard_error: np.ndarray


def run(
    config: NetworkConfig,
    power: float,
    slots: int,
    seed: int = 0,
    warmup: int | None = None,
    shift_before_decode: bool = True,
) -> SimResult:
    """Simulate `slots` post-warmup slots and tally destination outages.

    The run is split over independent replicas (a deterministic function of
    `slots`) that are stepped in lockstep; each replica discards its own
    warmup (default N + k slots). The 99% half-width uses the binomial
    variance of the pooled outage count.
    """
    if slots < 1:
        raise ValueError("slots must be positive")
    outages, per_replica, _ = _run_engine(
        config, power, slots, seed, warmup, False, shift_before_decode
    )
    warm = _default_warmup(config) if warmup is None else int(warmup)
    count = int(outages.sum())
    p = count / slots
    hw = _Z99 * math.sqrt(max(p * (1.0 - p), 0.0) / slots)
    return SimResult(
        slots=slots,
        warmup=warm,
        replicas=len(per_replica),
        seed=seed,
        outage_count=count,
        decoded_count=slots - count,
        outage_probability=p,
        ci_halfwidth=hw,
        ci_low=max(0.0, p - hw),
        ci_high=min(1.0, p + hw),
        replica_outages=tuple(int(x) for x in outages),
        replica_slots=tuple(int(x) for x in per_replica),
    )


def occupancy_histogram(
    config: NetworkConfig,
    power: float,
    slots: int,
    seed: int = 0,
    warmup: int | None = None,
) -> OccupancyResult:
    """Empirical distribution over network states at slot starts.

    Frequencies sum to one over the counted slots. The per-state standard
    error is estimated across replicas, which accounts for the slot-to-slot
    correlation a plain binomial formula would ignore.
    """
    state_space_size(config)  # enforce the cap before running
    _, per_replica, occ = _run_engine(config, power, slots, seed, warmup, True)
    counts = occ.sum(axis=0)
    freqs = counts / slots
    rep_freqs = occ / per_replica[:, None]
    n_rep = len(per_replica)
    if n_rep > 1:
        se = rep_freqs.std(axis=0, ddof=1) / math.sqrt(n_rep)
    else:
        f = freqs
        se = np.sqrt(np.clip(f * (1.0 - f), 0.0, None) / slots)
    return OccupancyResult(
        slots=slots,
        replicas=n_rep,
        counts=counts,
        frequencies=freqs,
        standard_error=se,
    )


def transition_frequencies(
    config: NetworkConfig,
    power: float,
    from_index: int,
    trials: int,
    seed: int = 0,
) -> np.ndarray:
    """One-step empirical transition frequencies out of a fixed state.

    Runs `trials` single-slot transitions from state `from_index` (1-based)
    and returns the length-M frequency vector over successor states, the
    empirical counterpart of one transition-matrix column.
    """
    _, m_states = state_space_size(config)
    if not 1 <= from_index <= m_states:
        raise ValueError(f"from_index must be in 1..{m_states}")
    eng = _engine(config, power)
    rng = np.random.default_rng(seed)
    counts = np.zeros(m_states, dtype=np.int64)
    chunk = 200_000
    left = trials
    while left > 0:
        n = min(chunk, left)
        codes = np.full(n, from_index - 1, dtype=np.int64)
        exp_draws = rng.standard_exponential((n, eng.n_links))
        mode_draws = rng.random((n, eng.nu)) if eng.nu else None
        new_codes, _ = eng.step_codes(codes, exp_draws, mode_draws)
        counts += np.bincount(new_codes, minlength=m_states)
        left -= n
    return counts / trials


@dataclass(frozen=True)
class SimState:
    """Scalar protocol state for inspection and single-step tests.

    Buffers mirror the occupancy arrays beta_i; message_ids optionally
    tracks which slot's signal occupies each cell (None when empty), which
    exercises the shifting bookkeeping.
    """

    buffers: tuple[tuple[int, ...], ...]
    lam: tuple[int, ...]
    t: int
    rng: np.random.Generator
    outage_count: int = 0
    decoded_count: int = 0
    message_ids: tuple[tuple[int | None, ...], ...] | None = None

    def code(self, config: NetworkConfig) -> int:
        c = 0
        for r, bit in enumerate(self.lam):
            c |= bit << lambda_shift(config, r)
        for i, buf in enumerate(self.buffers, start=1):
            for n, bit in enumerate(buf, start=1):
                c |= bit << beta_shift(config, i, n)
        return c

    def state_index(self, config: NetworkConfig) -> int:
        return self.code(config) + 1


def initial_state(config: NetworkConfig, seed: int = 0, track_messages: bool = False) -> SimState:
    rng = np.random.default_rng(seed)
    lam = tuple(
        int(x) for x in (rng.random(config.nu) < (1.0 - config.q_silent))
    ) if config.nu else ()
    buffers = tuple(tuple(0 for _ in range(l)) for l in config.buffer_sizes)
    ids = tuple(tuple(None for _ in range(l)) for l in config.buffer_sizes) if track_messages else None
    return SimState(buffers=buffers, lam=lam, t=0, rng=rng, message_ids=ids)


def _unpack_code(code: int, config: NetworkConfig):
    lam = tuple((code >> lambda_shift(config, r)) & 1 for r in range(config.nu))
    buffers = tuple(
        tuple((code >> beta_shift(config, i, n)) & 1 for n in range(1, l + 1))
        for i, l in enumerate(config.buffer_sizes, start=1)
    )
    return lam, buffers


def step(state: SimState, config: NetworkConfig, power: float) -> SimState:
    """Advance the scalar state one slot through the vector engine.

    The returned state shares (and has advanced) the generator of the input
    state. Destination tallies accumulate; message ids, when tracked, shift
    with the buffers and record the decoded slot index t - j + 1.
    """
    eng = _engine(config, power)
    codes = np.array([state.code(config)], dtype=np.int64)
    exp_draws = state.rng.standard_exponential((1, eng.n_links))
    mode_draws = state.rng.random((1, eng.nu)) if eng.nu else None
    new_codes, dest_ok = eng.step_codes(codes, exp_draws, mode_draws)
    lam, buffers = _unpack_code(int(new_codes[0]), config)
    ids = None
    if state.message_ids is not None:
        ids = []
        for j, (old, new_buf) in enumerate(zip(state.message_ids, buffers), start=1):
            head = state.t - j + 1 if new_buf[0] else None
            ids.append((head,) + old[:-1])
        ids = tuple(ids)
    decoded = bool(dest_ok[0])
    return replace(
        state,
        buffers=buffers,
        lam=lam,
        t=state.t + 1,
        outage_count=state.outage_count + (0 if decoded else 1),
        decoded_count=state.decoded_count + (1 if decoded else 0),
        message_ids=ids,
    )
