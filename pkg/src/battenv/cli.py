"""Command-line entry point: ``battenv <subcommand> [options]``.

Exit status is 0 on success, 1 when a check or correctness gate fails (or the
output cannot be written) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys

from . import bench
from .checks import run_parity
from .errors import ModelSpecError
from .presets import ALIASES, preset_names
from .specio import dumps_spec, load_spec

DOF_NOTE = "presets match robot DoF counts only, not their geometry"


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", default=None, choices=preset_names() + list(ALIASES))
    common.add_argument("--model", default=None, help="path to a model spec document (JSON)")
    common.add_argument("--nbatch", type=_int_list, default=None, help="comma-separated env counts")
    common.add_argument("--nthread", type=int, default=None, help="worker threads (0 = calling thread)")
    common.add_argument("--nstep", type=int, default=10)
    common.add_argument("--warmup", type=int, default=5)
    common.add_argument("--repeats", type=int, default=50)
    common.add_argument("--fractions", type=_float_list, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--csv", default=None, help="write records to this CSV file")
    common.add_argument("--plot", default=None, help="write an SVG plot to this path")

    parser = argparse.ArgumentParser(prog="battenv", description="Batched environment pool benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("parity", parents=[common], help="run parity and oracle checks")
    for name in bench.BENCHMARKS:
        sub.add_parser(name, parents=[common], help=f"{name.split('-', 1)[1]} benchmark")
    gen = sub.add_parser("gen-model", help="write a model spec document")
    gen.add_argument("source", help="preset name or path to an existing spec")
    gen.add_argument("out", help="output path ('-' for stdout)")
    return parser


def _config(args) -> bench.BenchConfig:
    kw = dict(nthread=args.nthread, nstep=args.nstep, warmup=args.warmup, repeats=args.repeats,
              csv=args.csv, plot=args.plot, seed=args.seed, model=args.model)
    if args.preset:
        kw["preset"] = args.preset
    if args.nbatch:
        kw["nbatch"] = args.nbatch
    if args.fractions:
        kw["fractions"] = args.fractions
    return bench.BenchConfig(**kw)


def cmd_parity(args) -> int:
    presets = [args.preset] if args.preset else ["pendulum", "go1-18"]
    nbatches = tuple(args.nbatch) if args.nbatch else (1, 7, 64)
    results, digest = run_parity(presets=presets, nbatches=nbatches, seeds=(args.seed, args.seed + 1),
                                 nthread=0 if args.nthread is None else args.nthread)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    print(f"parity hash: {digest}")
    return 0 if all(r.passed for r in results) else 1


def cmd_bench(args) -> int:
    cfg = _config(args)
    if args.command == "bench-hfield" and not args.preset and not args.model:
        cfg.preset = "terrain-walker"
    print(f"# {args.command} on {cfg.label} ({DOF_NOTE})")
    try:
        records = bench.BENCHMARKS[args.command](cfg)
    except bench.GateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for r in records:
        print(f"{r.benchmark:<28} N={r.nbatch:<5} threads={r.nthread:<3} {r.metric:<11} "
              f"median={r.median:.6g} q1={r.q1:.6g} q3={r.q3:.6g}")
    if cfg.csv:
        try:
            bench.write_csv(records, cfg.csv)
        except OSError as exc:
            print(f"error: cannot write {cfg.csv}: {exc}", file=sys.stderr)
            return 1
    return 0


def cmd_gen_model(args) -> int:
    from .presets import get_preset

    try:
        spec = get_preset(args.source) if args.source in preset_names() + list(ALIASES) else load_spec(args.source)
    except (OSError, ModelSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = dumps_spec(spec)
    if args.out == "-":
        sys.stdout.write(text)
        return 0
    try:
        with open(args.out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "parity":
            return cmd_parity(args)
        if args.command == "gen-model":
            return cmd_gen_model(args)
        return cmd_bench(args)
    except (ValueError, ModelSpecError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
