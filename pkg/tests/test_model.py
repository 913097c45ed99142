import pytest

from myopicrelay.model import (
    NetworkConfig,
    StateSpaceError,
    active_transmitter_count,
    buffer_sizes,
    decode_state,
    encode_state,
    equal_split_table,
    incoming_mask,
    link_indicator,
    state_space_size,
)


def cfg(n, k, dual=(), q=0.1, **kw):
    return NetworkConfig(n_relays=n, k_hops=k, dual_mode=dual, q_silent=q, **kw)


class TestConfig:
    def test_buffer_sizes(self):
        assert buffer_sizes(2, 2) == (2, 1)
        assert buffer_sizes(3, 2) == (2, 2, 1)
        assert buffer_sizes(3, 4) == (3, 2, 1)
        assert buffer_sizes(4, 1) == (1, 1, 1, 1)

    def test_equal_splits_sum_to_one(self):
        for n in (1, 2, 3, 4):
            for k in range(1, n + 2):
                table = equal_split_table(n, k)
                assert len(table) == n + 1
                for row in table:
                    assert sum(row) == pytest.approx(1.0, abs=1e-15)

    def test_default_positions_equispaced(self):
        c = cfg(2, 2, end_distance=3.0)
        assert c.node_positions == (0.0, 1.0, 2.0, 3.0)
        assert c.distance(0, 3) == 3.0
        assert c.distance(1, 3) == 2.0

    def test_custom_positions(self):
        c = cfg(2, 2, end_distance=4.0, node_positions=(0.0, 0.5, 2.0, 4.0))
        assert c.distance(0, 1) == 0.5

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            cfg(2, 0)
        with pytest.raises(ValueError):
            cfg(2, 4)
        with pytest.raises(ValueError):
            cfg(2, 2, dual=(3,))
        with pytest.raises(ValueError):
            cfg(2, 2, q=1.5)
        with pytest.raises(ValueError):
            cfg(2, 2, node_positions=(0.0, 2.0, 1.0, 3.0))
        with pytest.raises(ValueError):
            NetworkConfig(2, 2, splits=((0.7, 0.2), (0.5, 0.5), (1.0,)))
        with pytest.raises(ValueError):
            NetworkConfig(2, 2, splits=((1.0, 0.0), (0.5, 0.5), (1.0,)))

    def test_weights(self):
        c = cfg(2, 2)
        assert c.split(0, 1) == 0.5
        assert c.link_weight(0, 1) == pytest.approx(0.5)
        assert c.link_weight(0, 2) == pytest.approx(0.5 / 4.0)
        assert c.tau(100.0) == pytest.approx(0.01)


class TestStateSpace:
    @pytest.mark.parametrize(
        "n,k,dual,expected",
        [
            (2, 2, (), (3, 8)),
            (1, 1, (), (1, 2)),
            (3, 2, (1,), (5, 64)),
            (3, 4, (1, 2, 3), (6, 512)),
        ],
    )
    def test_sizes(self, n, k, dual, expected):
        assert state_space_size(cfg(n, k, dual)) == expected

    def test_cap(self):
        big = cfg(10, 5, q=0.0)
        with pytest.raises(StateSpaceError):
            state_space_size(big)
        # explicit larger cap admits it
        assert state_space_size(big, cap=2 ** 41)[1] == 2 ** 40

    def test_l_beta_equals_sum_of_sizes(self):
        for n in (1, 2, 3, 4, 5):
            for k in range(1, n + 2):
                c = cfg(n, k)
                assert c.l_beta == sum(c.buffer_sizes)


class TestEncoding:
    def test_extreme_states(self):
        c = cfg(2, 2, dual=(1,))
        _, m = state_space_size(c)
        s1 = decode_state(1, c)
        assert all(b == 0 for b in s1.bits)
        sm = decode_state(m, c)
        assert all(b == 1 for b in sm.bits)

    def test_worked_example_state_five(self):
        c = cfg(2, 2, dual=())
        s = decode_state(5, c)
        assert s.buffer_bits == (1, 0, 0)  # beta_1 = (1, 0), beta_2 = (0)

    @pytest.mark.parametrize("n,k,dual", [(2, 2, ()), (3, 2, (1, 3)), (3, 4, (2,)), (4, 3, ())])
    def test_roundtrip_exhaustive(self, n, k, dual):
        c = cfg(n, k, dual)
        _, m = state_space_size(c)
        for index in range(1, m + 1):
            assert encode_state(decode_state(index, c)) == index

    def test_out_of_range(self):
        c = cfg(2, 2)
        with pytest.raises(ValueError):
            decode_state(0, c)
        with pytest.raises(ValueError):
            decode_state(9, c)


class TestIndicators:
    def test_source_always_transmits(self):
        c = cfg(2, 2)
        for index in (1, 4, 8):
            s = decode_state(index, c)
            assert link_indicator(0, 1, s, c) == 1
            assert link_indicator(0, 2, s, c) == 1

    def test_silent_dual_relay(self):
        c = cfg(2, 2, dual=(1,))
        # relay 1 silent (lambda bit zero) but buffer full
        for index in range(1, 9):  # lambda=0 states are indices 1..8
            s = decode_state(index, c)
            assert link_indicator(1, 2, s, c) == 0

    def test_worked_example_relay1_feeds_relay2(self):
        c = cfg(2, 2)
        for index in (5, 6, 7, 8):
            s = decode_state(index, c)
            assert link_indicator(1, 2, s, c) == 1
        for index in (1, 2, 3, 4):
            s = decode_state(index, c)
            assert link_indicator(1, 2, s, c) == 0

    def test_invalid_pair_rejected(self):
        c = cfg(2, 2)
        s = decode_state(8, c)
        with pytest.raises(ValueError):
            link_indicator(0, 3, s, c)  # j - i > k
        with pytest.raises(ValueError):
            link_indicator(2, 2, s, c)

    def test_counts_worked_example(self):
        c = cfg(2, 2)
        # destination fed by both relays only at states 4 and 8
        for index, expected in [(1, 0), (2, 1), (3, 1), (4, 2), (5, 0), (8, 2)]:
            s = decode_state(index, c)
            assert active_transmitter_count(3, s, c) == expected

    def test_all_ones_interior_count_is_k(self):
        c = cfg(3, 2)
        _, m = state_space_size(c)
        s = decode_state(m, c)
        assert active_transmitter_count(2, s, c) == 2
        assert active_transmitter_count(3, s, c) == 2

    def test_empty_network_destination_starves(self):
        c = cfg(3, 2)
        s = decode_state(1, c)
        assert active_transmitter_count(4, s, c) == 0

    def test_count_bounds(self):
        c = cfg(3, 2, dual=(2,))
        _, m = state_space_size(c)
        for index in range(1, m + 1):
            s = decode_state(index, c)
            for j in range(1, 5):
                assert 0 <= active_transmitter_count(j, s, c) <= min(c.k_hops, j)

    def test_indicator_monotone_in_bits(self):
        c = cfg(2, 2, dual=(1,))
        _, m = state_space_size(c)
        links = [(i, j) for j in range(1, 4) for i in c.feeders(j)]
        for index in range(1, m + 1):
            s = decode_state(index, c)
            base = [link_indicator(i, j, s, c) for i, j in links]
            code = index - 1
            for bit in range(c.nu + c.l_beta):
                flipped = code | (1 << bit)
                if flipped == code:
                    continue
                s2 = decode_state(flipped + 1, c)
                better = [link_indicator(i, j, s2, c) for i, j in links]
                assert all(b2 >= b1 for b1, b2 in zip(base, better))

    def test_incoming_mask(self):
        c = cfg(2, 2)
        s4 = decode_state(4, c)
        assert incoming_mask(3, s4, c) == 0b110  # relays 1 and 2
        assert incoming_mask(2, s4, c) == 0b001  # source only
        s8 = decode_state(8, c)
        assert incoming_mask(2, s8, c) == 0b011
