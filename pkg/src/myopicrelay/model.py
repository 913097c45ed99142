"""Core network model: configuration, packed state encoding, link indicators.

The network is a line of nodes: source (node 0), N relays (nodes 1..N) and a
destination (node N+1). Under the k-hop myopic DF strategy a transmitter i
forwards to the next L_i = min(k, N-i+1) nodes, splitting its power with
weights a_{i,j}. Relay i keeps a shift-register buffer of L_i cells whose
occupancy bits, concatenated with the on/off mode bits of the dual-mode
relays, form one packed binary Markov-chain state.

Bit order of a state: mode bits of the dual-mode relays first (most
significant), then buffer bits beta_1[1..L_1], ..., beta_N[1..L_N]. The
1-based state index is the binary value plus one, so state 1 is all-zeros
and state M is all-ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

DEFAULT_STATE_CAP = 2 ** 24


class StateSpaceError(ValueError):
    """State space size exceeds the configured tractability cap."""


def buffer_sizes(n_relays: int, k_hops: int) -> tuple[int, ...]:
    """Buffer lengths L_i = min(k, N - i + 1) for relays i = 1..N."""
    return tuple(min(k_hops, n_relays - i + 1) for i in range(1, n_relays + 1))


def equal_split_table(n_relays: int, k_hops: int) -> tuple[tuple[float, ...], ...]:
    """Uniform power splits a_{i,j} = 1/L_i for every transmitter i = 0..N."""
    table = []
    for i in range(n_relays + 1):
        li = min(k_hops, n_relays - i + 1)
        table.append(tuple(1.0 / li for _ in range(li)))
    return tuple(table)


@dataclass(frozen=True)
class NetworkConfig:
    """Immutable description of one relay branch.

    splits[i] holds the power weights of transmitter i for its receivers
    i+1 .. i+L_i in order; each row must sum to one. node_positions are
    strictly increasing line coordinates for nodes 0..N+1 (defaults to an
    equispaced layout spanning end_distance). gamma is the linear SNR
    threshold and q_silent the per-slot probability that a dual-mode relay
    stays silent.
    """

    n_relays: int
    k_hops: int
    dual_mode: tuple[int, ...] = ()
    q_silent: float = 0.0
    end_distance: float = 3.0
    eta: float = 2.0
    sigma2: float = 1.0
    gamma: float = 1.0
    splits: tuple[tuple[float, ...], ...] = ()
    node_positions: tuple[float, ...] = ()

    def __post_init__(self):
        n, k = self.n_relays, self.k_hops
        if n < 1:
            raise ValueError("need at least one relay")
        if not 1 <= k <= n + 1:
            raise ValueError(f"k_hops must be in [1, {n + 1}], got {k}")
        dual = tuple(sorted(set(int(i) for i in self.dual_mode)))
        if dual and not (1 <= dual[0] and dual[-1] <= n):
            raise ValueError(f"dual_mode indices must lie in 1..{n}")
        object.__setattr__(self, "dual_mode", dual)
        if not 0.0 <= self.q_silent <= 1.0:
            raise ValueError("q_silent must be a probability")
        if self.sigma2 <= 0 or self.gamma < 0 or self.eta < 0:
            raise ValueError("sigma2 must be positive, gamma and eta nonnegative")

        if self.node_positions:
            pos = tuple(float(x) for x in self.node_positions)
            if len(pos) != n + 2:
                raise ValueError(f"node_positions must have length {n + 2}")
            if any(b <= a for a, b in zip(pos, pos[1:])):
                raise ValueError("node_positions must be strictly increasing")
            if abs((pos[-1] - pos[0]) - self.end_distance) > 1e-9 * max(1.0, self.end_distance):
                raise ValueError("end_distance inconsistent with node_positions")
        else:
            if self.end_distance <= 0:
                raise ValueError("end_distance must be positive")
            d = self.end_distance / (n + 1)
            pos = tuple(i * d for i in range(n + 2))
        object.__setattr__(self, "node_positions", pos)

        if self.splits:
            table = tuple(tuple(float(a) for a in row) for row in self.splits)
        else:
            table = equal_split_table(n, k)
        if len(table) != n + 1:
            raise ValueError(f"splits must have {n + 1} rows (transmitters 0..{n})")
        for i, row in enumerate(table):
            li = min(k, n - i + 1)
            if len(row) != li:
                raise ValueError(f"transmitter {i} needs {li} weights, got {len(row)}")
            if abs(sum(row) - 1.0) > 1e-9:
                raise ValueError(f"weights of transmitter {i} must sum to 1")
            for a in row:
                if a <= 0.0 or (li > 1 and a >= 1.0):
                    raise ValueError(f"weights of transmitter {i} must lie in (0, 1)")
        object.__setattr__(self, "splits", table)

    # -- derived quantities -------------------------------------------------

    @property
    def nu(self) -> int:
        """Number of dual-mode relays."""
        return len(self.dual_mode)

    @property
    def buffer_sizes(self) -> tuple[int, ...]:
        return buffer_sizes(self.n_relays, self.k_hops)

    @property
    def l_beta(self) -> int:
        return sum(self.buffer_sizes)

    def receivers(self, i: int) -> range:
        """Receivers of transmitter i: nodes i+1 .. min(i+k, N+1)."""
        return range(i + 1, min(i + self.k_hops, self.n_relays + 1) + 1)

    def feeders(self, j: int) -> range:
        """Potential transmitters of receiver j: nodes max(0, j-k) .. j-1."""
        return range(max(0, j - self.k_hops), j)

    def distance(self, i: int, j: int) -> float:
        return abs(self.node_positions[j] - self.node_positions[i])

    def split(self, i: int, j: int) -> float:
        """Power weight a_{i,j} of link i -> j."""
        return self.splits[i][j - i - 1]

    def link_weight(self, i: int, j: int) -> float:
        """Combined link gain a_{i,j} / d_{i,j}^eta."""
        return self.split(i, j) / self.distance(i, j) ** self.eta

    def tau(self, power: float) -> float:
        """Threshold ratio gamma * sigma^2 / P."""
        if power <= 0:
            raise ValueError("power must be positive")
        return self.gamma * self.sigma2 / power

    def with_splits(self, table) -> "NetworkConfig":
        return replace(self, splits=tuple(tuple(row) for row in table))


def state_space_size(config: NetworkConfig, cap: int = DEFAULT_STATE_CAP) -> tuple[int, int]:
    """Return (L_beta, M): total buffer bits and number of network states.

    L_beta = (2N - k + 1) k / 2 and M = 2^(L_beta + nu). Raises
    StateSpaceError when M exceeds the cap.
    """
    n, k = config.n_relays, config.k_hops
    l_beta = (2 * n - k + 1) * k // 2
    assert l_beta == config.l_beta
    m = 2 ** (l_beta + config.nu)
    if m > cap:
        raise StateSpaceError(
            f"state space has {m} states, above the cap of {cap}"
        )
    return l_beta, m


@dataclass(frozen=True)
class NetworkState:
    """One network state: dual-mode bits plus flattened buffer bits."""

    index: int
    relay_bits: tuple[int, ...]
    buffer_bits: tuple[int, ...]

    @property
    def bits(self) -> tuple[int, ...]:
        return self.relay_bits + self.buffer_bits


def total_bits(config: NetworkConfig) -> int:
    return config.nu + config.l_beta


def lambda_shift(config: NetworkConfig, r: int) -> int:
    """Bit shift of the mode bit of the r-th dual-mode relay (0-based r)."""
    return total_bits(config) - 1 - r


def beta_shift(config: NetworkConfig, i: int, n: int) -> int:
    """Bit shift of buffer bit beta_i[n] (relay i in 1..N, cell n in 1..L_i)."""
    sizes = config.buffer_sizes
    pos = config.nu + sum(sizes[: i - 1]) + (n - 1)
    return total_bits(config) - 1 - pos


def decode_state(index: int, config: NetworkConfig) -> NetworkState:
    """Unpack a 1-based state index into relay and buffer bit vectors."""
    _, m = state_space_size(config)
    if not 1 <= index <= m:
        raise ValueError(f"state index must be in 1..{m}, got {index}")
    code = index - 1
    nbits = total_bits(config)
    bits = tuple((code >> (nbits - 1 - p)) & 1 for p in range(nbits))
    nu = config.nu
    return NetworkState(index=index, relay_bits=bits[:nu], buffer_bits=bits[nu:])


def encode_state(state: NetworkState) -> int:
    """Inverse of decode_state: state bits back to the 1-based index."""
    code = 0
    for b in state.bits:
        code = (code << 1) | (b & 1)
    return code + 1


def beta(state: NetworkState, config: NetworkConfig, i: int) -> tuple[int, ...]:
    """Occupancy array beta_i of relay i (1-based), sliced from the state."""
    sizes = config.buffer_sizes
    start = sum(sizes[: i - 1])
    return state.buffer_bits[start : start + sizes[i - 1]]


def relay_active(state: NetworkState, config: NetworkConfig, i: int) -> int:
    """Mode of relay i this slot: 1 unless i is dual-mode and silent."""
    if i in config.dual_mode:
        return state.relay_bits[config.dual_mode.index(i)]
    return 1


def link_indicator(i: int, j: int, state: NetworkState, config: NetworkConfig) -> int:
    """1 iff node i sends a signal to node j in this state.

    The source always transmits (virtual all-ones buffer beta_0 of length k);
    relay i transmits on i -> j iff buffer cell j-i is occupied and the relay
    is active.
    """
    if not (0 <= i < j <= config.n_relays + 1 and j - i <= config.k_hops):
        raise ValueError(f"({i} -> {j}) is not a link of this network")
    if i == 0:
        return 1
    return beta(state, config, i)[j - i - 1] & relay_active(state, config, i)


def active_transmitter_count(j: int, state: NetworkState, config: NetworkConfig) -> int:
    """Number of nodes transmitting to receiver j in this state (0..k)."""
    return sum(link_indicator(i, j, state, config) for i in config.feeders(j))


def incoming_mask(j: int, state: NetworkState, config: NetworkConfig) -> int:
    """Bitmask over transmitter indices i that feed receiver j in this state."""
    mask = 0
    for i in config.feeders(j):
        if link_indicator(i, j, state, config):
            mask |= 1 << i
    return mask
