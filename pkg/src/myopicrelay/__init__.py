"""Outage and diversity analysis of buffer-aided k-hop myopic DF relaying.

The library models a line network whose relays forward decoded messages to
their next k neighbors, tracks buffer occupancy and relay modes as a Markov
chain, and evaluates outage probability, outage floors and the
diversity-multiplexing tradeoff both analytically and by time-slotted Monte
Carlo simulation.
"""

from .analysis import (
    DmtCurve,
    FlowGraph,
    deployment_check,
    diversity_order,
    dmt,
    estimate_slope,
    multi_branch_dmt,
    multi_branch_outage,
    outage_floor,
    system_outage,
)
from .configio import ConfigError, RunSettings, load_config, parse_config_text
from .markov import (
    StationaryDistribution,
    StationaryError,
    TransitionMatrix,
    build_matrix,
    stationary,
    transition_exists,
    transition_probability,
)
from .model import (
    DEFAULT_STATE_CAP,
    NetworkConfig,
    NetworkState,
    StateSpaceError,
    active_transmitter_count,
    decode_state,
    encode_state,
    link_indicator,
    state_space_size,
)
from .optimize import SplitSolution, equal_splits, optimize_splits
from .outage import (
    IntegrationError,
    LinkPattern,
    characteristic_function,
    conventional_benchmark,
    outage_gil_pelaez,
    outage_per_node,
    outage_saa,
    outage_single_link,
)
from .simulate import (
    OccupancyResult,
    SimResult,
    SimState,
    initial_state,
    occupancy_histogram,
    run,
    step,
    transition_frequencies,
)

__version__ = "0.1.0"
