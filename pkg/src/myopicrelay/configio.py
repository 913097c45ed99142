"""Flat key = value experiment configuration files.

Grammar: one `key = value` pair per line, blank lines and `#` comments
ignored. Recognized keys:

    n_relays       int, required
    k_hops         int, required
    dual_mode      comma list of relay indices (default empty)
    q              silent probability of a dual-mode relay (default 0.0)
    end_distance   source-destination distance in meters (default 3.0)
    eta            path loss exponent (default 2.0)
    sigma2         noise variance, linear (default 1.0)
    gamma_db       SNR threshold in dB (default 0.0)
    splits         equal | optimized | per-transmitter table, e.g.
                   "0: 0.5 0.5; 1: 0.4 0.6; 2: 1" (default equal)
    seed           RNG seed for simulations (default 12345)
    slots          simulated slots (default 1000000)
    power_grid_db  comma list of transmit powers in dB
                   (default 0,5,10,15,20,25,30,35,40)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .model import NetworkConfig

__all__ = ["ConfigError", "RunSettings", "parse_config_text", "load_config"]

_DEFAULT_GRID = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)


class ConfigError(ValueError):
    """Malformed experiment configuration file."""


@dataclass(frozen=True)
class RunSettings:
    """Sweep settings that accompany a network configuration."""

    seed: int = 12345
    slots: int = 1_000_000
    power_grid_db: tuple[float, ...] = _DEFAULT_GRID
    splits_mode: str = "equal"


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def _parse_splits_table(text: str, n_relays: int):
    table: dict[int, tuple[float, ...]] = {}
    for group in text.split(";"):
        group = group.strip()
        if not group:
            continue
        head, _, tail = group.partition(":")
        try:
            i = int(head)
            weights = tuple(float(x) for x in tail.split())
        except ValueError as exc:
            raise ConfigError(f"bad splits group {group!r}") from exc
        table[i] = weights
    missing = [i for i in range(n_relays + 1) if i not in table]
    if missing:
        raise ConfigError(f"splits table misses transmitters {missing}")
    return tuple(table[i] for i in range(n_relays + 1))


def parse_config_text(text: str) -> tuple[NetworkConfig, RunSettings]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip().lower()
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()

    known = {
        "n_relays", "k_hops", "dual_mode", "q", "end_distance", "eta",
        "sigma2", "gamma_db", "splits", "seed", "slots", "power_grid_db",
    }
    unknown = set(pairs) - known
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    for req in ("n_relays", "k_hops"):
        if req not in pairs:
            raise ConfigError(f"missing required key {req!r}")

    def geti(key, default=None):
        if key not in pairs:
            return default
        try:
            return int(pairs[key])
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: expected integer") from exc

    def getf(key, default):
        if key not in pairs:
            return default
        try:
            return float(pairs[key])
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: expected number") from exc

    n_relays = geti("n_relays")
    k_hops = geti("k_hops")
    dual = ()
    if pairs.get("dual_mode", "").strip():
        try:
            dual = tuple(int(x) for x in pairs["dual_mode"].split(","))
        except ValueError as exc:
            raise ConfigError("dual_mode: expected comma list of integers") from exc

    splits_mode = "equal"
    splits_table = ()
    raw_splits = pairs.get("splits", "equal").strip()
    if raw_splits in ("equal", "optimized"):
        splits_mode = raw_splits
    else:
        splits_mode = "explicit"
        splits_table = _parse_splits_table(raw_splits, n_relays)

    grid = _DEFAULT_GRID
    if "power_grid_db" in pairs:
        text_grid = pairs["power_grid_db"].strip()
        if not text_grid:
            raise ConfigError("power_grid_db must list at least one power")
        try:
            grid = tuple(float(x) for x in text_grid.split(","))
        except ValueError as exc:
            raise ConfigError("power_grid_db: expected comma list of numbers") from exc
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("power_grid_db must be strictly increasing")

    try:
        config = NetworkConfig(
            n_relays=n_relays,
            k_hops=k_hops,
            dual_mode=dual,
            q_silent=getf("q", 0.0),
            end_distance=getf("end_distance", 3.0),
            eta=getf("eta", 2.0),
            sigma2=getf("sigma2", 1.0),
            gamma=db_to_linear(getf("gamma_db", 0.0)),
            splits=splits_table,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    settings = RunSettings(
        seed=geti("seed", 12345),
        slots=geti("slots", 1_000_000),
        power_grid_db=grid,
        splits_mode=splits_mode,
    )
    return config, settings


def load_config(path) -> tuple[NetworkConfig, RunSettings]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)
