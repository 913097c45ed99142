"""Command-line experiment runner emitting CSV curves and reports.

Subcommands: analyze (outage curve sweep), simulate (Monte Carlo sweep),
states (transition matrix dump), dmt, floor, multibranch, optimize and
acceptance. Power levels are transmit powers in dB relative to unit noise
variance; probabilities are linear. Sweep points can be dispatched to a
process pool sized by the MYOPICRELAY_WORKERS environment variable without
changing any output byte.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import acceptance as acceptance_mod
from .analysis import diversity_order, multi_branch_outage, outage_floor, system_outage
from .configio import ConfigError, RunSettings, db_to_linear, load_config
from .markov import build_matrix
from .model import NetworkConfig
from .optimize import optimize_splits
from .outage import conventional_benchmark
from .simulate import run as run_simulation

__all__ = ["CurvePoint", "OutageCurve", "run_sweep", "main"]


class CliError(RuntimeError):
    pass


@dataclass(frozen=True)
class CurvePoint:
    p_db: float
    outage_analytic: float
    outage_saa: float
    outage_benchmark: float
    outage_sim: float | None
    ci_low: float | None
    ci_high: float | None
    splits_mode: str


@dataclass(frozen=True)
class OutageCurve:
    """Per-power outage records of one sweep."""

    points: tuple[CurvePoint, ...]

    def __post_init__(self):
        ps = [pt.p_db for pt in self.points]
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("curve powers must be strictly increasing")
        for pt in self.points:
            for v in (pt.outage_analytic, pt.outage_saa, pt.outage_benchmark):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"probability {v} out of range at {pt.p_db} dB")
            if pt.outage_sim is not None:
                if not pt.ci_low <= pt.outage_sim <= pt.ci_high:
                    raise ValueError(f"simulation CI inconsistent at {pt.p_db} dB")

    def column(self, name: str):
        return [getattr(pt, name) for pt in self.points]

    HEADER = (
        "p_db", "outage_analytic", "outage_saa", "outage_benchmark",
        "outage_sim", "ci_low", "ci_high", "splits_mode",
    )

    def write_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.HEADER)
        for pt in self.points:
            writer.writerow([_fmt(getattr(pt, col)) for col in self.HEADER])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _point_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def _sweep_point(payload) -> CurvePoint:
    (config, p_db, splits_mode, method, simulate, slots, seed, index) = payload
    power = db_to_linear(p_db)
    try:
        cfg = config
        mode = splits_mode
        if splits_mode == "optimized":
            cfg = config.with_splits(
                optimize_splits(config, power, method=method, seed=seed).splits
            )
        analytic = system_outage(cfg, power, method="exact")
        saa = system_outage(cfg, power, method="saa")
        bench = conventional_benchmark(cfg, power)
        sim = ci_low = ci_high = None
        if simulate:
            res = run_simulation(cfg, power, slots, seed=_point_seed(seed, index))
            sim, ci_low, ci_high = res.outage_probability, res.ci_low, res.ci_high
        return CurvePoint(p_db, analytic, saa, bench, sim, ci_low, ci_high, mode)
    except Exception as exc:
        raise CliError(f"sweep failed at P = {p_db} dB: {exc}") from exc


def _worker_count() -> int:
    raw = os.environ.get("MYOPICRELAY_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"MYOPICRELAY_WORKERS must be an integer, got {raw!r}")
    return max(1, n)


def run_sweep(
    config: NetworkConfig,
    settings: RunSettings,
    simulate: bool = False,
    method: str = "exact",
    splits_mode: str | None = None,
    workers: int | None = None,
) -> OutageCurve:
    """Evaluate the outage curve over the configured power grid.

    Rows are ordered by power regardless of how sweep points are scheduled;
    repeated runs with the same inputs produce identical CSV bytes.
    """
    if not settings.power_grid_db:
        raise CliError("power grid is empty")
    mode = splits_mode or settings.splits_mode
    payloads = [
        (config, p_db, mode, method, simulate, settings.slots, settings.seed, idx)
        for idx, p_db in enumerate(settings.power_grid_db)
    ]
    n_workers = _worker_count() if workers is None else workers
    if n_workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            points = list(pool.map(_sweep_point, payloads))
    else:
        points = [_sweep_point(p) for p in payloads]
    return OutageCurve(points=tuple(points))


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _emit(path, write):
    stream, close = _open_out(path)
    try:
        write(stream)
    finally:
        if close:
            stream.close()


def _cmd_analyze(args) -> int:
    config, settings = load_config(args.config)
    if args.seed is not None:
        settings = RunSettings(args.seed, settings.slots, settings.power_grid_db, settings.splits_mode)
    if args.slots is not None:
        settings = RunSettings(settings.seed, args.slots, settings.power_grid_db, settings.splits_mode)
    curve = run_sweep(
        config,
        settings,
        simulate=args.simulate,
        method=args.method,
        splits_mode=None if args.splits == "file" else args.splits,
    )
    _emit(args.out, curve.write_csv)
    return 0


def _cmd_simulate(args) -> int:
    config, settings = load_config(args.config)
    seed = settings.seed if args.seed is None else args.seed
    slots = settings.slots if args.slots is None else args.slots
    grid = (args.power_db,) if args.power_db is not None else settings.power_grid_db

    def write(stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["p_db", "outage_sim", "ci_low", "ci_high", "slots"])
        for idx, p_db in enumerate(grid):
            res = run_simulation(config, db_to_linear(p_db), slots, seed=_point_seed(seed, idx))
            writer.writerow([_fmt(p_db), _fmt(res.outage_probability),
                             _fmt(res.ci_low), _fmt(res.ci_high), res.slots])

    _emit(args.out, write)
    return 0


def _cmd_states(args) -> int:
    config, _ = load_config(args.config)
    tm = build_matrix(config, db_to_linear(args.power_db), method=args.method)
    mat = tm.matrix.tocoo()
    order = np.lexsort((mat.row, mat.col))

    def write(stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["from_index", "to_index", "probability"])
        for idx in order:
            writer.writerow([mat.col[idx] + 1, mat.row[idx] + 1, _fmt(float(mat.data[idx]))])

    _emit(args.out, write)
    return 0


def _cmd_dmt(args) -> int:
    config, _ = load_config(args.config)
    print(f"diversity_order,{diversity_order(config)}")
    return 0


def _cmd_floor(args) -> int:
    if args.config:
        config, _ = load_config(args.config)
        n, k, q = config.n_relays, config.k_hops, config.q_silent
    else:
        if None in (args.n, args.k, args.q):
            raise CliError("floor needs either --config or all of --n/--k/--q")
        n, k, q = args.n, args.k, args.q
    print(f"n_relays,k_hops,q,floor")
    print(f"{n},{k},{_fmt(q)},{_fmt(outage_floor(n, k, q))}")
    return 0


def _cmd_multibranch(args) -> int:
    branches = []
    for path in args.config:
        cfg, _ = load_config(path)
        branches.append(cfg)
    power = db_to_linear(args.power_db)
    outage = multi_branch_outage(branches, power)
    order = sum(diversity_order(cfg) for cfg in branches)
    print("p_db,branches,outage,diversity_order")
    print(f"{_fmt(args.power_db)},{len(branches)},{_fmt(outage)},{order}")
    return 0


def _cmd_optimize(args) -> int:
    config, settings = load_config(args.config)
    seed = settings.seed if args.seed is None else args.seed
    sol = optimize_splits(config, db_to_linear(args.power_db), method=args.method, seed=seed)

    def write(stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["transmitter", "receiver", "weight"])
        for i, row in enumerate(sol.splits):
            for offset, a in enumerate(row, start=1):
                writer.writerow([i, i + offset, _fmt(a)])
        writer.writerow(["outage", "", _fmt(sol.outage)])

    _emit(args.out, write)
    return 0


def _cmd_acceptance(args) -> int:
    wanted = None
    if args.criteria:
        wanted = sorted({int(x) for x in args.criteria.split(",")})
    rows, ok = acceptance_mod.run_acceptance(
        criteria=wanted, tolerance_scale=args.tolerance_scale
    )
    stream, close = _open_out(args.out)
    try:
        for row in rows:
            stream.write(acceptance_mod.format_row(row) + "\n")
        passed = sum(1 for r in rows if r.passed)
        stream.write(f"# {passed}/{len(rows)} checks passed\n")
    finally:
        if close:
            stream.close()
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="myopicrelay",
        description="Outage and diversity analysis of k-hop myopic relay networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config file")
        p.add_argument("--out", default=None, help="output CSV path (default stdout)")

    p = sub.add_parser("analyze", help="analytic outage curve over the power grid")
    add_common(p)
    p.add_argument("--simulate", action="store_true", help="add Monte Carlo columns")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--method", choices=["exact", "saa"], default="exact",
                   help="objective method for optimized splits")
    p.add_argument("--splits", choices=["equal", "optimized", "file"], default="file",
                   help="override the splits mode of the config file")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo outage over the power grid")
    add_common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--power-db", type=float, default=None, help="single power instead of the grid")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("states", help="dump transition matrix entries as CSV")
    add_common(p)
    p.add_argument("--power-db", type=float, required=True)
    p.add_argument("--method", choices=["exact", "saa"], default="exact")
    p.set_defaults(func=_cmd_states)

    p = sub.add_parser("dmt", help="diversity order of one branch")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_dmt)

    p = sub.add_parser("floor", help="high-power outage floor (all relays dual-mode)")
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--q", type=float, default=None)
    p.set_defaults(func=_cmd_floor)

    p = sub.add_parser("multibranch", help="outage of orthogonal branches at one power")
    p.add_argument("--config", action="append", required=True,
                   help="branch config file; repeat once per branch")
    p.add_argument("--power-db", type=float, required=True)
    p.set_defaults(func=_cmd_multibranch)

    p = sub.add_parser("optimize", help="optimize power splits at one power")
    add_common(p)
    p.add_argument("--power-db", type=float, required=True)
    p.add_argument("--method", choices=["exact", "saa"], default="exact")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("acceptance", help="run the acceptance criteria suite")
    p.add_argument("--criteria", default=None, help="comma list, e.g. 1,3,5 (default all)")
    p.add_argument("--tolerance-scale", type=float, default=1.0,
                   help="multiply every bound; a self-test hook")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_acceptance)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
