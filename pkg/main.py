"""
Main entry point for the LGR sparse-AD toolkit

Subcommands:
    basis   print mesh points, quadrature weights and D triplets
    check   verify sparse derivatives against the dense oracle and finite differences
    export  write Jacobian/Hessian in Matrix Market format plus gradient and residual
    bench   sparsity and timing against the number of mesh segments

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""
import argparse
import json
import sys
from typing import List, Optional

import config
from orchestrator import CollocationOrchestrator, resolve_problem
from sparsead import MeshSpec
from sparsead.errors import SparseADError


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an unsigned integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsead",
        description="Sparse second-order forward AD for LGR collocation",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    basis = commands.add_parser("basis", help="print M, W and D triplets of a mesh")
    basis.add_argument("--degrees", type=_int_list, required=True, help="segment degrees, e.g. 2 or 3,3")
    basis.add_argument("--boundaries", type=_float_list, help="segment boundaries from 0 to 1 (default uniform)")
    basis.add_argument("--json", action="store_true", help="print one JSON object")

    check = commands.add_parser("check", help="verify derivatives of a problem")
    check.add_argument("--problem", required=True, help="problem JSON file or built-in name")
    check.add_argument("--at", choices=("ones", "random"), default="ones", help="evaluation point")
    check.add_argument("--seed", type=_seed, default=config.DEFAULT_SEED)
    check.add_argument("--fd-step", type=float, default=config.FD_STEP)
    check.add_argument("--tol", type=float, default=config.CHECK_TOLERANCE)

    export = commands.add_parser("export", help="write NLP data in Matrix Market format")
    export.add_argument("--problem", required=True, help="problem JSON file or built-in name")
    export.add_argument("--point", default="ones", help="ones, random or @FILE")
    export.add_argument("--seed", type=_seed, default=config.DEFAULT_SEED)
    export.add_argument("--out", default=config.OUTPUT_DIRECTORY, help="output directory")

    bench = commands.add_parser("bench", help="sparsity and timing against mesh size")
    bench.add_argument("--problem", required=True, help="problem JSON file or built-in name")
    bench.add_argument("--segments", type=_int_list, required=True, help="segment counts, e.g. 10,20,40")
    bench.add_argument("--degree", type=int, required=True, help="degree of every segment")
    bench.add_argument("--repeat", type=_positive_int, default=config.BENCH_REPEAT)
    formats = bench.add_mutually_exclusive_group()
    formats.add_argument("--csv", action="store_true", help="comma-separated output")
    formats.add_argument("--json", action="store_true", help="JSON output")
    bench.add_argument("--no-time", action="store_true", help="omit the timing column")
    return parser


def _run(args: argparse.Namespace) -> int:
    orchestrator = CollocationOrchestrator()

    if args.command == "basis":
        spec = MeshSpec.from_degrees(args.degrees, args.boundaries)
        orchestrator.basis(spec, as_json=args.json)
        return 0

    problem, mesh_spec = resolve_problem(args.problem)
    if args.command == "check":
        passed = orchestrator.check(
            problem, mesh_spec, at=args.at, seed=args.seed, fd_step=args.fd_step, tol=args.tol
        )
        return 0 if passed else 1
    if args.command == "export":
        orchestrator.export(problem, mesh_spec, point=args.point, out_dir=args.out, seed=args.seed)
        return 0

    output = "json" if args.json else "csv" if args.csv else "table"
    orchestrator.bench(
        problem,
        args.segments,
        args.degree,
        repeat=args.repeat,
        output=output,
        timed=not args.no_time,
    )
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and map errors to exit codes"""
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (SparseADError, OSError, json.JSONDecodeError) as e:
        print("\n" + "=" * 70, file=sys.stderr)
        print(f"ERROR: {e}", file=sys.stderr)
        print("=" * 70 + "\n", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
