import math

import numpy as np
import pytest

from myopicrelay.markov import build_matrix, stationary
from myopicrelay.model import NetworkConfig, state_space_size
from myopicrelay.simulate import (
    initial_state,
    occupancy_histogram,
    run,
    step,
)


def cfg(n, k, dual=(), q=0.1, **kw):
    return NetworkConfig(n_relays=n, k_hops=k, dual_mode=dual, q_silent=q, **kw)


class TestRun:
    def test_deterministic(self):
        c = cfg(2, 2)
        a = run(c, 100.0, 50_000, seed=42)
        b = run(c, 100.0, 50_000, seed=42)
        assert a == b
        assert run(c, 100.0, 50_000, seed=43) != a

    def test_ci_fields_consistent(self):
        c = cfg(2, 2)
        r = run(c, 10.0, 50_000, seed=1)
        assert r.slots == 50_000
        assert r.outage_count + r.decoded_count == r.slots
        assert r.ci_low <= r.outage_probability <= r.ci_high
        p = r.outage_probability
        assert r.ci_halfwidth == pytest.approx(
            2.5758293035489004 * math.sqrt(p * (1 - p) / r.slots)
        )
        assert sum(r.replica_outages) == r.outage_count
        assert sum(r.replica_slots) == r.slots

    def test_all_silent_never_delivers(self):
        c = cfg(2, 2, dual=(1, 2), q=1.0)
        assert run(c, 100.0, 20_000, seed=5).outage_probability == 1.0

    def test_zero_threshold_always_delivers(self):
        c = cfg(2, 2, gamma=0.0)
        assert run(c, 100.0, 20_000, seed=5).outage_probability == 0.0

    def test_monotone_in_power_with_common_randomness(self):
        c = cfg(2, 2, dual=(1,), q=0.2)
        outs = [
            run(c, 10.0 ** (p / 10.0), 100_000, seed=11).outage_probability
            for p in (0, 5, 10, 15, 20, 25)
        ]
        assert all(a >= b for a, b in zip(outs, outs[1:]))

    def test_phase_order_matters(self):
        # decoding into the first cell before the shift is the wrong order
        # and must produce a different (worse) chain
        c = cfg(2, 2)
        good = run(c, 100.0, 100_000, seed=9)
        bad = run(c, 100.0, 100_000, seed=9, shift_before_decode=False)
        assert bad.outage_probability > good.outage_probability * 2

    def test_matches_analytic_outage(self):
        c = cfg(3, 2, dual=(1,), q=0.1)
        power = 10.0 ** 1.5
        from myopicrelay.analysis import system_outage

        analytic = system_outage(c, power)
        r = run(c, power, 1_000_000, seed=21)
        assert r.ci_low <= analytic <= r.ci_high


class TestOccupancy:
    def test_frequencies_match_stationary(self):
        c = cfg(2, 2)
        power = 100.0
        pi = stationary(build_matrix(c, power)).pi
        occ = occupancy_histogram(c, power, 1_000_000, seed=3)
        slots = occ.slots
        binom = np.sqrt(np.clip(pi * (1 - pi), 0.0, None) / slots)
        se = np.maximum(occ.standard_error, binom)
        assert (np.abs(occ.frequencies - pi) <= 3 * se).all()

    def test_bookkeeping(self):
        c = cfg(2, 2, dual=(2,))
        occ = occupancy_histogram(c, 50.0, 40_000, seed=8)
        _, m_states = state_space_size(c)
        assert occ.counts.shape == (m_states,)
        assert occ.counts.sum() == occ.slots == 40_000
        assert occ.frequencies.sum() == pytest.approx(1.0, abs=1e-12)

    def test_mass_concentrates_at_high_power(self):
        c = cfg(2, 2)
        occ = occupancy_histogram(c, 1e5, 100_000, seed=4)
        assert occ.frequencies[-1] > 0.99

    def test_empty_state_present_at_low_power(self):
        c = cfg(2, 2)
        occ = occupancy_histogram(c, 0.5, 100_000, seed=4)
        assert occ.frequencies[0] > 0.0


class TestScalarStep:
    def test_state_index_valid_along_trajectory(self):
        c = cfg(3, 2, dual=(1, 3), q=0.3)
        _, m_states = state_space_size(c)
        s = initial_state(c, seed=2)
        for _ in range(200):
            assert 1 <= s.state_index(c) <= m_states
            s = step(s, c, 20.0)
        assert s.t == 200
        assert s.outage_count + s.decoded_count == s.t

    def test_buffer_shapes_preserved(self):
        c = cfg(3, 4)
        s = initial_state(c, seed=0)
        for _ in range(50):
            s = step(s, c, 30.0)
        assert tuple(len(b) for b in s.buffers) == c.buffer_sizes

    def test_message_ids_track_shifts(self):
        c = cfg(2, 2)
        s = initial_state(c, seed=6, track_messages=True)
        for _ in range(60):
            prev = s
            s = step(s, c, 30.0)
            t_prev = prev.t
            for j, (bits, ids) in enumerate(zip(s.buffers, s.message_ids), start=1):
                # occupancy and identity agree cell by cell
                for n, (bit, mid) in enumerate(zip(bits, ids), start=1):
                    assert (bit == 1) == (mid is not None)
                    if mid is not None:
                        # cell n of relay j at slot t holds the signal decoded
                        # n-1 slots ago, which entered the network j+n-1 slots ago
                        assert mid == s.t - j - n + 1
                # shifted cells carry the previous slot's identities
                assert ids[1:] == prev.message_ids[j - 1][: len(ids) - 1]

    def test_scalar_step_law_matches_matrix_column(self):
        c = cfg(2, 2)
        power = 60.0
        tm = build_matrix(c, power)
        col = tm.to_dense()[:, 0]
        counts = np.zeros(8)
        trials = 40_000
        s0 = initial_state(c, seed=77)
        for _ in range(trials):
            s = step(s0, c, power)
            counts[s.state_index(c) - 1] += 1
            s0 = s0  # fresh draws come from the shared generator
            object.__setattr__(s0, "t", 0)
        freq = counts / trials
        se = np.sqrt(np.clip(col * (1 - col), 0.0, None) / trials)
        assert (np.abs(freq - col) <= 4 * np.maximum(se, 5e-5)).all()
