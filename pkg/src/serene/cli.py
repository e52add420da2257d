"""Command-line front end: simulate, sweep, report, bench.

Every scenario knob is overridable by flag; a config file supplies the
base values. Exit codes: 0 success, 1 usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, ScenarioConfig
from .engine import SCHEMES, run
from .metrics import MetricRow
from . import sweep as sweep_mod

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(_usage_error(message))


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


_FLAG_TO_KEY = {
    "n": "n_workers",
    "k": "pool_size",
    "colluding": "colluding_fraction",
    "naive": "naive_fraction",
    "pc": "p_collude",
    "epsilon": "epsilon",
    "cvt_len": "cvt_len",
    "detect_period": "detect_period",
    "e": "obs_per_edge",
    "pair_target": "pair_pool_target",
    "rate": "task_rate",
    "rtt_min": "rtt_min_ms",
    "rtt_max": "rtt_max_ms",
    "sim_end": "sim_end",
    "start_window": "collusion_start_window",
    "seed": "rng_seed",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="flat key=value scenario file")
    p.add_argument("--n", type=int, help="number of workers")
    p.add_argument("--k", type=int, help="voting pool size (odd, >=3)")
    p.add_argument("--colluding", type=float, help="colluding fraction of workers")
    p.add_argument("--naive", type=float, help="naive-malicious fraction")
    p.add_argument("--pc", type=float, help="collusion probability P_c")
    p.add_argument("--epsilon", type=float, help="honest error rate")
    p.add_argument("--cvt-len", dest="cvt_len", type=int, help="CVT table size L")
    p.add_argument("--detect-period", dest="detect_period", type=float, help="probe period seconds")
    p.add_argument("--e", type=int, help="observations per edge / verification budget")
    p.add_argument("--pair-target", dest="pair_target", type=int, help="pools per worker pair for TR")
    p.add_argument("--rate", type=float, help="tasks per second")
    p.add_argument("--rtt-min", dest="rtt_min", type=float, help="min RTT ms")
    p.add_argument("--rtt-max", dest="rtt_max", type=float, help="max RTT ms")
    p.add_argument("--sim-end", dest="sim_end", type=float, help="simulated seconds")
    p.add_argument("--start-window", dest="start_window", metavar="LO,HI",
                   help="collusion activation window seconds")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--run-to-end", action="store_true",
                   help="keep simulating after mitigation finalizes")


def _config_from_args(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_file(args.config) if args.config else ScenarioConfig()
    overrides = {}
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "run_to_end", False):
        overrides["stop_after_mitigation"] = False
    return cfg.with_overrides(overrides)


def _row_json(row: MetricRow) -> str:
    rec = dataclasses.asdict(row)
    for key, value in rec.items():
        if isinstance(value, float) and math.isinf(value):
            rec[key] = "inf"
    return json.dumps(rec, indent=2)


def cmd_simulate(args) -> int:
    try:
        cfg = _config_from_args(args)
    except (ConfigError, OSError) as exc:
        return _usage_error(str(exc)) if isinstance(exc, ConfigError) else _io_error(exc)
    scheme = args.scheme
    trace = run(cfg, scheme=scheme, seed=args.seed if args.seed is not None else cfg.rng_seed)
    if args.trace:
        from .trace import write_trace

        try:
            write_trace(trace, args.trace)
        except OSError as exc:
            return _io_error(exc)
    print(_row_json(MetricRow.from_trace(trace)))
    return EXIT_OK


def _io_error(exc) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return EXIT_IO


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _parse_cvt_lens(text: str, n_workers: int) -> list[int]:
    """Table sizes, either absolute or as fractions of the worker count."""
    out = []
    for tok in text.replace(",", " ").split():
        value = float(tok)
        if value < 1.0:
            out.append(max(1, int(value * n_workers + 0.5)))
        else:
            out.append(int(value))
    return out


def cmd_sweep(args) -> int:
    try:
        cfg = _config_from_args(args)
    except (ConfigError, OSError) as exc:
        return _usage_error(str(exc)) if isinstance(exc, ConfigError) else _io_error(exc)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return _io_error(exc)

    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    unknown = [s for s in schemes if s not in SCHEMES]
    if unknown:
        return _usage_error(f"unknown schemes: {unknown}; valid: {list(SCHEMES)}")

    plan = sweep_mod.build_plan(
        cfg,
        schemes=schemes,
        colluding=_parse_float_list(args.colluding_grid),
        p_collude=_parse_float_list(args.pc_grid),
        cvt_lens=_parse_cvt_lens(args.l_sweep, cfg.n_workers) if args.l_sweep else (None,),
        obs_values=_parse_int_list(args.e_sweep) if args.e_sweep else (None,),
        repetitions=args.reps,
        base_seed=args.base_seed if args.base_seed is not None else cfg.rng_seed,
        include_controls=not args.no_controls,
    )

    started = time.perf_counter()
    rows = []

    def progress(i, total, trace):
        if args.quiet:
            return
        if i % 25 == 0 or i == total:
            rate = i / (time.perf_counter() - started)
            print(f"\r{i}/{total} runs ({rate:.1f}/s)", end="", file=sys.stderr, flush=True)

    for row in sweep_mod.execute(plan, progress=progress):
        rows.append(row)
    if not args.quiet:
        print(file=sys.stderr)

    try:
        count = sweep_mod.write_runs_csv(rows, out_dir / "runs.csv")
        summary = sweep_mod.summarize(rows)
        summary["wall_seconds"] = time.perf_counter() - started
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        return _io_error(exc)
    print(f"wrote {count} rows to {out_dir / 'runs.csv'}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rows = []
        for path in args.inputs:
            rows.extend(sweep_mod.read_runs_csv(path))
    except (OSError, ValueError) as exc:
        return _io_error(exc)
    summary = sweep_mod.summarize(rows)
    text = json.dumps(summary, indent=2) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            return _io_error(exc)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench

    return run_bench(sim_end=args.sim_end, seed=args.seed or 1, compare=not args.no_compare)


def main(argv=None) -> int:
    parser = _Parser(prog="serene", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario, print its metric row")
    _add_config_flags(p_sim)
    p_sim.add_argument("--scheme", choices=SCHEMES, default="serene")
    p_sim.add_argument("--trace", metavar="FILE", help="write the full JSONL trace here")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a scenario grid, write runs.csv + summary.json")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--out", required=True, metavar="DIR")
    p_sweep.add_argument("--schemes", default="serene",
                         help=f"comma list from {', '.join(SCHEMES)}")
    p_sweep.add_argument("--colluding-grid", default="0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 0.9",
                         metavar="LIST", help="colluding fractions to sweep")
    p_sweep.add_argument("--pc-grid", default="0.1 0.5 0.9", metavar="LIST")
    p_sweep.add_argument("--l-sweep", metavar="LIST",
                         help="CVT sizes to sweep; values below 1 are fractions of N")
    p_sweep.add_argument("--e-sweep", metavar="LIST", help="observation budgets to sweep")
    p_sweep.add_argument("--reps", type=int, default=30)
    p_sweep.add_argument("--base-seed", type=int)
    p_sweep.add_argument("--no-controls", action="store_true",
                         help="skip the no-collusion control cells")
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="aggregate existing runs.csv files")
    p_rep.add_argument("inputs", nargs="+", metavar="runs.csv")
    p_rep.add_argument("--out", metavar="summary.json")
    p_rep.set_defaults(func=cmd_report)

    p_bench = sub.add_parser("bench", help="compare compiled vs interpreted backends")
    p_bench.add_argument("--sim-end", type=float, default=5.0)
    p_bench.add_argument("--seed", type=int, default=1)
    p_bench.add_argument("--no-compare", action="store_true",
                         help="time the current backend only")
    p_bench.set_defaults(func=cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _usage_error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
