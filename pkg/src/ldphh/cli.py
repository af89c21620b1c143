"""Command-line interface.

Subcommands: gen (synthetic datasets), run (one protocol), compare
(protocol/parameter sweeps), analyze (utility model for a config), and
optimize (pick the best extension schedule for a budget).

Exit codes: 0 success, 2 usage error, 3 infeasible configuration, 4 I/O
error.  Outputs are deterministic for a fixed command line; wall-clock
timing is opt-in because it would break byte-identical reruns.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .analysis import analysis_report, default_support, optimize
from .datagen import DistributionSpec, GeneratorSpec, generate, save
from .harness import (
    DEFAULT_QUERY_LIMIT,
    ExperimentSpec,
    render_csv,
    render_json,
    run_experiment,
    summarize,
)
from .pem import PemConfig

EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument(
        "--query-limit",
        type=int,
        default=DEFAULT_QUERY_LIMIT,
        help="server-side frequency-query budget (default 2^20)",
    )
    parser.add_argument("--out", "-o", help="output path (default stdout)")
    parser.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="row output format"
    )


def _add_dist_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--dist", choices=("zipf", "exp"), default="zipf", help="distribution family"
    )
    parser.add_argument("--s", type=float, default=1.5, help="zipf exponent")
    parser.add_argument("--drop", type=int, default=0, help="zipf head offset")
    parser.add_argument("--rate", type=float, default=0.05, help="exponential rate")


def _dist_from_flags(args) -> DistributionSpec:
    if args.dist == "zipf":
        return DistributionSpec.zipf(s=args.s, drop=args.drop)
    return DistributionSpec.exponential(rate=args.rate)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldphh",
        description="Locally differentially private heavy-hitter experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset + ground truth")
    _add_dist_flags(p_gen)
    p_gen.add_argument("--support", type=int, required=True, help="distinct values")
    p_gen.add_argument("--n", type=int, required=True, help="number of users")
    p_gen.add_argument("--m", type=int, required=True, help="value width in bits")
    _add_common(p_gen)

    def add_run_flags(p, many_protocols: bool) -> None:
        if many_protocols:
            p.add_argument("--protocols", nargs="*", default=[], help="protocols to sweep")
            p.add_argument("--eps", type=float, nargs="+", required=True)
            p.add_argument("--k", type=int, nargs="+", default=None)
            p.add_argument("--eta", type=int, nargs="+", default=None, dest="etas")
        else:
            p.add_argument("--protocol", required=True, choices=("pem", "spm", "mcm"))
            p.add_argument("--eps", type=float, required=True)
            p.add_argument("--k", type=int, default=None)
            p.add_argument("--eta", type=int, default=None, dest="etas")
        p.add_argument("--data", required=True, help="dataset path (with .truth.json)")
        p.add_argument("--m", type=int, default=None, help="value width (default: sidecar)")
        p.add_argument("--mode", choices=("int", "text"), default="int")
        p.add_argument("--theta", type=float, default=None, help="frequency threshold")
        p.add_argument("--reps", type=int, default=1)
        p.add_argument("--variant", choices=("split", "partition"), default="split")
        p.add_argument(
            "--final-frac",
            type=float,
            default=0.1,
            help="user share reserved for the final test (partition variant)",
        )
        p.add_argument("--seg-len", type=int, default=None, help="mcm segment bits")
        p.add_argument(
            "--timing",
            action="store_true",
            help="record wall_ms (breaks byte-identical determinism)",
        )
        _add_common(p)

    add_run_flags(sub.add_parser("run", help="run one protocol"), many_protocols=False)
    add_run_flags(
        sub.add_parser("compare", help="sweep protocols x parameters"),
        many_protocols=True,
    )

    for name, needs_eta in (("analyze", True), ("optimize", False)):
        p = sub.add_parser(
            name,
            help="score a schedule analytically"
            if needs_eta
            else "pick the best schedule for a budget",
        )
        _add_dist_flags(p)
        p.add_argument("--support", type=int, default=None, help="assumed support size")
        p.add_argument("--n", type=int, required=True, help="population size")
        p.add_argument("--m", type=int, required=True)
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--eps", type=float, required=True)
        if needs_eta:
            p.add_argument("--eta", type=int, default=None, help="force one extension width")
        _add_common(p)
    return parser


def _experiment_spec(args, many_protocols: bool) -> ExperimentSpec:
    if many_protocols:
        protocols = tuple(args.protocols)
        eps_values = tuple(args.eps)
        k, k_values = None, None
        if args.k is not None:
            if len(args.k) == 1:
                k = args.k[0]
            else:
                k_values = tuple(args.k)
        etas = tuple(args.etas) if args.etas is not None else None
    else:
        protocols = (args.protocol,)
        eps_values = (args.eps,)
        k, k_values = args.k, None
        etas = (args.etas,) if args.etas is not None else None
    return ExperimentSpec(
        protocols=protocols,
        data_path=args.data,
        eps_values=eps_values,
        k=k,
        theta=args.theta,
        reps=args.reps,
        master_seed=args.seed,
        query_limit=args.query_limit,
        m=args.m,
        etas=etas,
        k_values=k_values,
        variant=args.variant,
        final_frac=args.final_frac,
        seg_len=args.seg_len,
        mode=args.mode,
        timing=args.timing,
    )


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_gen(args) -> int:
    spec = GeneratorSpec(
        dist=_dist_from_flags(args),
        support_size=args.support,
        n=args.n,
        m=args.m,
        master_seed=args.seed,
    )
    save(generate(spec), args.out, spec)
    return 0


def _cmd_run(spec: ExperimentSpec, args) -> int:
    rows = run_experiment(spec)
    summary = summarize(rows)
    render = render_csv if args.format == "csv" else render_json
    _emit(render(rows, summary), args.out)
    return 0


def _cmd_analyze(args, force_eta: int | None) -> int:
    dist = _dist_from_flags(args)
    support = args.support if args.support is not None else default_support(dist, args.k)
    if force_eta is None:
        cfg = optimize(
            dist, args.m, args.k, args.n, args.eps, args.query_limit, support=support
        )
    else:
        gamma = (args.k - 1).bit_length()
        if force_eta > args.m - gamma:
            raise ValueError(
                f"eta={force_eta} exceeds the {args.m - gamma} bits left after gamma"
            )
        cfg = PemConfig(
            m=args.m,
            gamma=gamma,
            eta=force_eta,
            g=math.ceil((args.m - gamma) / force_eta),
            k=args.k,
            eps=args.eps,
            query_limit=args.query_limit,
        )
    doc = analysis_report(dist, cfg, args.n, support=support)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen" and args.out is None:
        parser.error("gen requires --out for the dataset path")
    spec = None
    if args.command in ("run", "compare"):
        try:
            spec = _experiment_spec(args, many_protocols=args.command == "compare")
        except ValueError as exc:
            parser.error(str(exc))
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command in ("run", "compare"):
            return _cmd_run(spec, args)
        if args.command == "analyze":
            return _cmd_analyze(args, force_eta=args.eta)
        return _cmd_analyze(args, force_eta=None)
    except (ValueError, TypeError) as exc:
        print(f"error: infeasible configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
