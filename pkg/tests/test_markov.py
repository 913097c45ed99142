import itertools

import numpy as np
import pytest
from scipy import sparse

from myopicrelay.markov import (
    StationaryError,
    TransitionMatrix,
    assert_irreducible,
    build_matrix,
    stationary,
    transition_exists,
    transition_probability,
)
from myopicrelay.model import NetworkConfig, decode_state, state_space_size
from myopicrelay.outage import outage_per_node
from myopicrelay.simulate import transition_frequencies


def cfg(n, k, dual=(), q=0.1):
    return NetworkConfig(n_relays=n, k_hops=k, dual_mode=dual, q_silent=q)


class TestTransitionExists:
    def test_idle_self_loop(self):
        c = cfg(2, 2)
        assert transition_exists(1, 1, c)

    def test_worked_example_zero_block(self):
        c = cfg(2, 2)
        # states 3 and 4 are unreachable from columns 1..4
        for m in (1, 2, 3, 4):
            assert not transition_exists(m, 3, c)
            assert not transition_exists(m, 4, c)
            assert transition_exists(m, 1, c)
        for m in (5, 6, 7, 8):
            assert transition_exists(m, 3, c)
            assert not transition_exists(m, 1, c)

    def test_shift_semantics(self):
        c = cfg(2, 2)
        # beta_1 = (1, 0) is state 5; successors need beta_1[2] = 1
        from myopicrelay.model import beta

        for l in range(1, 9):
            if transition_exists(5, l, c):
                assert beta(decode_state(l, c), c, 1)[1] == 1


class TestBuildMatrix:
    def test_worked_example_pattern(self):
        c = cfg(2, 2)
        dense = build_matrix(c, 100.0).to_dense()
        expected = np.zeros((8, 8), dtype=bool)
        for l in (1, 2, 5, 6):
            expected[l - 1, 0:4] = True
        for l in (3, 4, 7, 8):
            expected[l - 1, 4:8] = True
        assert ((dense > 0) == expected).all()

    @pytest.mark.parametrize("n,k,dual", [(2, 2, ()), (2, 3, (1,)), (3, 2, (1, 3)), (3, 4, (1, 2, 3))])
    def test_column_stochastic_and_sparsity(self, n, k, dual):
        c = cfg(n, k, dual)
        tm = build_matrix(c, 50.0)
        assert np.abs(tm.column_sums() - 1.0).max() <= 1e-12
        assert tm.structural_entries_per_column().max() <= 2 ** (c.nu + n)
        data = tm.matrix.data
        assert data.min() >= 0.0 and data.max() <= 1.0

    def test_matches_scalar_entries(self):
        c = cfg(2, 2, dual=(2,), q=0.3)
        tm = build_matrix(c, 30.0)
        _, m_states = state_space_size(c)
        rng = np.random.default_rng(0)
        pairs = list(itertools.product(range(1, m_states + 1), repeat=2))
        rng.shuffle(pairs)
        for m, l in pairs:
            assert tm.entry(l, m) == pytest.approx(
                transition_probability(m, l, c, 30.0), abs=1e-15
            )

    def test_rebuild_identical(self):
        c = cfg(3, 2, dual=(1,))
        a = build_matrix(c, 80.0)
        b = build_matrix(c, 80.0)
        assert (a.matrix != b.matrix).nnz == 0

    def test_q_zero_silences_dual_states(self):
        c = cfg(2, 2, dual=(1,), q=0.0)
        tm = build_matrix(c, 100.0)
        dense = tm.to_dense()
        _, m_states = state_space_size(c)
        # rows whose lambda bit is zero receive no mass
        for l in range(1, m_states + 1):
            if decode_state(l, c).relay_bits[0] == 0:
                assert dense[l - 1].sum() == 0.0

    def test_worked_example_two_factor_product(self):
        c = cfg(2, 2)
        power = 40.0
        tm = build_matrix(c, power)
        for m in (1, 6):
            sm = decode_state(m, c)
            po1 = outage_per_node(1, sm, c, power)
            po2 = outage_per_node(2, sm, c, power)
            for l in range(1, 9):
                if not transition_exists(m, l, c):
                    continue
                sl = decode_state(l, c)
                b1, b2 = sl.buffer_bits[0], sl.buffer_bits[2]
                expected = (b1 * (1 - po1) + (1 - b1) * po1) * (
                    b2 * (1 - po2) + (1 - b2) * po2
                )
                assert tm.entry(l, m) == pytest.approx(expected, abs=1e-15)


class TestStationary:
    def test_two_state_symmetric_chain(self):
        mat = sparse.csc_array(np.array([[0.5, 0.5], [0.5, 0.5]]))
        tm = TransitionMatrix(config=None, power=1.0, method="exact", matrix=mat, degenerate=False)
        st = stationary(tm)
        assert st.pi == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_residual_and_normalization(self):
        for n, k, dual in [(2, 2, ()), (3, 2, (1, 2)), (2, 3, (1,))]:
            tm = build_matrix(cfg(n, k, dual), 60.0)
            st = stationary(tm)
            assert st.residual <= 1e-10
            assert abs(st.pi.sum() - 1.0) <= 1e-10
            assert st.pi.min() >= 0.0

    def test_direct_vs_power_agreement(self):
        for n, k, dual in [(2, 2, ()), (2, 1, (1,)), (3, 2, (1, 3)), (3, 4, (2,))]:
            tm = build_matrix(cfg(n, k, dual), 45.0)
            direct = stationary(tm, force_method="direct")
            power = stationary(tm, force_method="power")
            assert np.abs(direct.pi - power.pi).max() <= 1e-9

    def test_high_power_mass_on_full_state(self):
        tm = build_matrix(cfg(2, 2), 1e6)
        st = stationary(tm)
        assert st.pi[-1] > 0.999
        assert st.pi[:-1].max() < 1e-3

    def test_irreducibility_of_nondegenerate_chains(self):
        for n, k in [(2, 1), (2, 2), (2, 3)]:
            tm = build_matrix(cfg(n, k), 50.0)
            if not tm.degenerate:
                assert_irreducible(tm)
                assert tm.entry(1, 1) > 0.0

    def test_degenerate_chain_uses_power_path(self):
        # relay 3 can starve (k < position), so a per-node outage is exactly 1
        tm = build_matrix(cfg(3, 2), 50.0)
        assert tm.degenerate
        st = stationary(tm)
        assert st.method == "power"
        assert st.residual <= 1e-10
        assert len(st.support) > 0

    def test_singular_matrix_rejected(self):
        mat = sparse.csc_array(np.eye(3))  # three disjoint communicating classes
        tm = TransitionMatrix(config=None, power=1.0, method="exact", matrix=mat, degenerate=False)
        with pytest.raises(StationaryError):
            stationary(tm)


class TestAgainstSimulator:
    def test_one_step_frequencies_match_columns(self):
        c = cfg(2, 2, dual=(2,), q=0.2)
        power = 60.0
        tm = build_matrix(c, power)
        _, m_states = state_space_size(c)
        trials = 1_000_000
        for m in (1, m_states // 2, m_states):
            freq = transition_frequencies(c, power, m, trials, seed=101)
            col = tm.to_dense()[:, m - 1]
            se = np.sqrt(np.clip(col * (1 - col), 0.0, None) / trials)
            live = col > 0
            assert (np.abs(freq - col) <= 3 * np.maximum(se, 1e-6)).all()
            assert freq[~live].sum() == 0.0
