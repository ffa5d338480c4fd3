"""Command-line entry point: ``dramdse explore`` and ``dramdse verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .dram import AccessCategory, DramArch, DramGeometry, classify_tile_stream, get_policy, load_geometry
from .errors import ConfigError, DseError, InfeasibleLayerError, NetworkError, OracleMismatch
from .oracle import replay_state_machine, replay_tile, write_trace_csv
from .report import RunConfig, run
from .workload import BufferConfig, ScheduleScheme

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NETWORK = 3
EXIT_INFEASIBLE = 4
EXIT_ORACLE = 5


def _csv_list(text, convert, label):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError(f"--{label} needs at least one value")
    try:
        return tuple(convert(t) for t in items)
    except ValueError as exc:
        raise ConfigError(f"--{label}: {exc}") from None


def _buffers(text) -> BufferConfig:
    sizes = _csv_list(text, int, "buffers")
    if len(sizes) == 1:
        sizes = sizes * 3
    if len(sizes) != 3:
        raise ConfigError("--buffers takes iB,wB,oB in bytes (or a single size for all three)")
    return BufferConfig(*sizes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dramdse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("explore", help="run the min-EDP exploration over a network")
    ex.add_argument("--network", type=Path, help="network JSON (default: bundled AlexNet conv1-5)")
    ex.add_argument("--arch", default="ddr3,salp1,salp2,salpmasa")
    ex.add_argument("--schemes", default="ifms,wghs,ofms,adaptive")
    ex.add_argument("--mappings", default="1,2,3,4,5,6")
    ex.add_argument("--buffers", default="65536,65536,65536", help="iB,wB,oB in bytes")
    ex.add_argument("--geometry", type=Path, help="geometry JSON (default: DDR3 2Gb x8)")
    ex.add_argument("--costs", type=Path, help="cost-table JSON (default: bundled DDR3-1600 table)")
    ex.add_argument("--tiling", default="divisors", help="divisors | exhaustive | step:N")
    ex.add_argument("--out", type=Path, default=Path("results"))
    ex.add_argument("--oracle-check", type=int, default=32, metavar="N",
                    help="replay N sampled candidates through the trace oracle (0 disables)")
    ex.add_argument("--log-candidates", action="store_true", help="also write every evaluated candidate")

    ve = sub.add_parser("verify", help="compare closed-form counts with a trace replay")
    ve.add_argument("--policy", required=True, help="mapping id 1..6")
    ve.add_argument("--words", type=int, required=True)
    ve.add_argument("--geometry", type=Path)
    ve.add_argument("--arch", default=None, help="also run the open-row state machine for this arch")
    ve.add_argument("--trace", type=Path, help="dump the per-access trace to this CSV")
    return parser


def _explore(args) -> int:
    config = RunConfig(
        network=args.network,
        geometry=args.geometry,
        costs=args.costs,
        buffers=_buffers(args.buffers),
        archs=_csv_list(args.arch, DramArch, "arch"),
        schemes=_csv_list(args.schemes, ScheduleScheme, "schemes"),
        mappings=_csv_list(args.mappings, int, "mappings"),
        tiling=args.tiling,
        out=args.out,
        oracle_check=args.oracle_check,
        log_candidates=args.log_candidates,
    )
    summary = run(config)
    for layer in summary["layers"]:
        for arch, best in layer["best"].items():
            print(f"{layer['layer']:>8} {arch:>9}  mapping {best['mapping']}  "
                  f"scheme {best['scheme']:<8} tile {best['Tp']}x{best['Tq']}x{best['Tm']}x{best['Tc']}  "
                  f"EDP {best['edp']:.6g}")
    for arch, tot in summary["network"].items():
        print(f"network {arch:>9}  EDP {tot['edp']:.6g}")
    print(f"oracle: {summary['oracle']['checked']} candidates replayed, 0 mismatches")
    print(f"wrote {args.out}/results.csv, comparison.csv, summary.json")
    return EXIT_OK


def _verify(args) -> int:
    geom = load_geometry(args.geometry) if args.geometry else DramGeometry()
    policy = get_policy(args.policy)
    model = classify_tile_stream(args.words, policy, geom)
    replay = replay_tile(args.words, policy, geom, keep_trace=args.trace is not None)
    print(f"mapping {policy}  words {args.words}")
    print(f"{'category':<14}{'closed-form':>14}{'replay':>14}")
    for cat in AccessCategory:
        print(f"{cat.value:<14}{model.get(cat):>14}{replay.counts.get(cat):>14}")
    if args.trace is not None:
        write_trace_csv(replay, args.trace)
    if args.arch:
        sm = replay_state_machine(args.words, policy, geom, args.arch)
        print(f"state machine ({DramArch(args.arch).value}): {sm.counts}, bank-return hits {sm.bank_return_hits}")
    if model != replay.counts:
        print("MISMATCH", file=sys.stderr)
        return EXIT_ORACLE
    print("match")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "explore":
            return _explore(args)
        return _verify(args)
    except NetworkError as exc:
        print(f"invalid network: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except InfeasibleLayerError as exc:
        print(f"infeasible layer: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
