"""Command-line entry point.

Subcommands map one-to-one onto experiment kinds; a JSON config file can
stand in for flags. Exit codes: 0 success, 2 invalid configuration, 3 when
some grid cells recorded failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import adversary as adv
from .errors import BoostlabError, InvalidInput
from .harness import (
    EXIT_INVALID_CONFIG,
    ExperimentConfig,
    run_experiment,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    parser.add_argument("--out", default=None, help="output path (stdout if omitted)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument(
        "--no-header-meta",
        action="store_true",
        help="suppress the timestamped comment line, for byte-stable output",
    )
    parser.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boostlab",
        description="Boosting experiments: one-shot sampled booster, sequential "
        "baseline, adversarial weak-learner trials, tail-bound checks, and "
        "generalization bound tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment described by a JSON config")
    run.add_argument("--config", required=True)

    sb = sub.add_parser("sampled-boost", help="one-shot booster over a parameter grid")
    sb.add_argument("--gamma", type=float, nargs="+", default=[0.2])
    sb.add_argument("--m", type=int, nargs="+", default=[50])
    sb.add_argument("--d", type=int, default=2)
    sb.add_argument("--rounds", type=int, default=0, help="override the round count")
    sb.add_argument("--sample-factor", type=float, default=4.0)
    sb.add_argument("--retry-cap", type=int, default=1000)
    sb.add_argument("--dataset", default="realizable-by-stumps",
                    choices=("realizable-by-stumps", "finite-class"))
    sb.add_argument("--oracle-mode", default="weakest", choices=("best", "weakest"))
    sb.add_argument("--trace-out", default=None,
                    help="write the full run trace of the first grid cell "
                         "and seed as JSON")
    _add_common(sb)

    ab = sub.add_parser("adaboost", help="sequential fixed-weight baseline")
    ab.add_argument("--gamma", type=float, nargs="+", default=[0.2])
    ab.add_argument("--m", type=int, nargs="+", default=[50])
    ab.add_argument("--d", type=int, default=2)
    ab.add_argument("--rounds", type=int, default=0,
                    help="round budget (defaults to the full schedule)")
    ab.add_argument("--dataset", default="realizable-by-stumps",
                    choices=("realizable-by-stumps", "finite-class"))
    ab.add_argument("--oracle-mode", default="weakest", choices=("best", "weakest"))
    ab.add_argument("--trace-out", default=None,
                    help="write the full run trace of the first grid cell "
                         "and seed as JSON")
    _add_common(ab)

    sim = sub.add_parser("adversary-sim", help="learner-vs-adversary trials")
    sim.add_argument("--learner", default="truncated-adaboost",
                     choices=("constant", "truncated-adaboost", "singleton-prober",
                              "random-probes"))
    sim.add_argument("--p", type=int, nargs="+", default=[1])
    sim.add_argument("--beta", type=float, nargs="+", default=None)
    sim.add_argument("--gamma", type=float, default=0.05)
    sim.add_argument("--d", type=int, default=8)
    sim.add_argument("--m", type=int, default=128, help="half the domain size")
    sim.add_argument("--m-train", type=int, default=None)
    sim.add_argument("--a-prime", type=float, default=4.0)
    sim.add_argument("--probes", type=int, default=16)
    sim.add_argument("--check", action="store_true",
                     help="audit structure invariants and response validity")
    sim.add_argument("--allow-over-budget", action="store_true",
                     help="permit hypothesis counts beyond 2^d (tiny-d demos)")
    sim.add_argument("--dump-state", default=None,
                     help="write one full adversary state as JSON (reveals the "
                          "concept; first seed, first grid cell)")
    _add_common(sim)

    tc = sub.add_parser("tail-check", help="Monte-Carlo audit of the "
                        "without-replacement tail bounds")
    tc.add_argument("--rho", type=float, nargs="+", default=[10.0])
    tc.add_argument("--n", type=int, nargs="+", default=[30])
    tc.add_argument("--delta", type=float, nargs="+", default=[0.3, 0.5])
    tc.add_argument("--side", nargs="+", default=["lower", "upper"])
    tc.add_argument("--population", default="two-level", choices=("two-level", "graded"))
    tc.add_argument("--population-size", type=int, default=200)
    tc.add_argument("--high-fraction", type=float, default=0.5)
    tc.add_argument("--trials", type=int, default=100000)
    _add_common(tc)

    bt = sub.add_parser("bounds-table", help="generalization bound calculators")
    bt.add_argument("--d", type=int, nargs="+", default=[5])
    bt.add_argument("--m", type=int, nargs="+", default=[1000])
    bt.add_argument("--delta", type=float, nargs="+", default=[0.05])
    bt.add_argument("--gamma", type=float, nargs="+", default=[0.1])
    bt.add_argument("--constant", type=float, default=1.0)
    _add_common(bt)

    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "run":
        return ExperimentConfig.from_json(args.config)

    def grid(value):
        # single-valued lists stay scalars so they do not become grid axes
        if isinstance(value, list) and len(value) == 1:
            return value[0]
        return value

    if args.command in ("sampled-boost", "adaboost"):
        params = {
            "gamma": grid(args.gamma),
            "m": grid(args.m),
            "d": args.d,
            "dataset": args.dataset,
            "oracle_mode": args.oracle_mode,
        }
        if args.rounds:
            params["rounds"] = args.rounds
        if args.command == "sampled-boost":
            params["sample_factor"] = args.sample_factor
            params["retry_cap"] = args.retry_cap
    elif args.command == "adversary-sim":
        params = {
            "learner": args.learner,
            "p": grid(args.p),
            "gamma": args.gamma,
            "d": args.d,
            "m": args.m,
            "m_train": args.m_train or args.m,
            "a_prime": args.a_prime,
            "probes": args.probes,
            "check": args.check,
            "enforce_budget": not args.allow_over_budget,
        }
        if args.beta is not None:
            params["beta"] = grid(args.beta)
    elif args.command == "tail-check":
        params = {
            "rho": grid(args.rho),
            "n": grid(args.n),
            "delta": grid(args.delta),
            "side": grid(args.side),
            "population": args.population,
            "population_size": args.population_size,
            "high_fraction": args.high_fraction,
            "trials": args.trials,
        }
    else:
        params = {
            "d": grid(args.d),
            "m": grid(args.m),
            "delta": grid(args.delta),
            "gamma": grid(args.gamma),
            "constant": args.constant,
        }

    return ExperimentConfig(
        kind=args.command,
        parameters=params,
        seeds=args.seeds,
        out=args.out,
        fmt=args.format,
        header_meta=not args.no_header_meta,
        workers=args.workers,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if getattr(args, "dump_state", None):
            _dump_state(cfg, args.dump_state)
        if getattr(args, "trace_out", None):
            from .harness import expand_grid, export_boost_trace

            first = expand_grid(cfg.parameters)[0]
            export_boost_trace(cfg.kind, first, cfg.seeds[0], args.trace_out)
        result = run_experiment(cfg)
    except (InvalidInput, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except BoostlabError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    if not cfg.out:
        from .harness import render_output

        sys.stdout.write(
            render_output(result.rows, result.fieldnames, cfg).decode("utf-8")
        )
    for row in result.failures():
        print(f"cell failed: {row}", file=sys.stderr)
    return result.exit_code


def _dump_state(cfg: ExperimentConfig, path: str) -> None:
    params = dict(cfg.parameters)
    cells_p = params.get("p", 1)
    p = cells_p[0] if isinstance(cells_p, (list, tuple)) else cells_p
    beta = params.get("beta")
    if isinstance(beta, (list, tuple)):
        beta = beta[0]
    aparams = adv.AdversaryParams(
        m=int(params["m"]),
        d=int(params["d"]),
        gamma=float(params["gamma"]),
        p=int(p),
        beta=beta,
        a_prime=float(params.get("a_prime", 4.0)),
        declared_width=2 * int(params["m"]),
        enforce_hypothesis_budget=bool(params.get("enforce_budget", True)),
    )
    state = adv.build_adversary(aparams, cfg.seeds[0])
    with open(path, "w") as fh:
        json.dump(state.to_record(), fh)


if __name__ == "__main__":
    raise SystemExit(main())
