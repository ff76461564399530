"""Command-line entry points: run experiments, fit slopes, generate envs."""
from __future__ import annotations

import argparse
import json
import sys

from .core import InstanceParams, RngStream
from .environments import (
    big_cost_trap_matrix,
    hidden_best_arm_instance,
    random_matrix_spec,
    save_matrix_csv,
)
from .harness import (
    RunTrace,
    emit_results,
    fit_loglog_slope,
    load_config,
    parse_summary_csv,
    run_experiment,
)


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    prefix = args.out or config.output
    if prefix is None:
        raise ValueError("no output prefix: pass --out or set 'output' in the config")
    traces: list[tuple[int, RunTrace]] = []
    hook = None
    if args.emit_traces:
        hook = lambda budget, rep, sid, trace: traces.append((sid, trace))
    rows = run_experiment(config, threads=args.threads, trace_hook=hook)
    written = emit_results(rows, traces, prefix, config)
    for path in written:
        print(path)
    return 0


def _cmd_slope(args: argparse.Namespace) -> int:
    rows = parse_summary_csv(args.summary)
    policies = sorted({r.policy for r in rows})
    if len(policies) != 1:
        raise ValueError(f"summary mixes policies {policies}; fit them separately")
    slope = fit_loglog_slope([(r.budget, r.mean_regret) for r in rows])
    print(format(slope, ".6g"))
    return 0


def _cmd_gen_env(args: argparse.Namespace) -> int:
    rng = RngStream(args.seed)
    if args.kind == "hidden-best-arm":
        params = InstanceParams(
            n_arms=args.arms, budget=args.budget, cost_min=args.cost_min
        )
        spec = hidden_best_arm_instance(params, rng)
        doc = {
            "kind": "stochastic",
            "cost_min": spec.params.cost_min,
            "cost_max": spec.params.cost_max,
            "optimal_arm": spec.optimal_arm,
            "arms": [
                {
                    "reward": {"type": "bernoulli", "p": r.p, "hi": r.hi, "lo": r.lo},
                    "cost": {"type": "point", "value": c.value},
                }
                for r, c in zip(spec.reward_dists, spec.cost_dists)
            ],
        }
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif args.kind == "big-cost-trap":
        spec = big_cost_trap_matrix(
            args.alpha, args.budget, optimal_arm=args.optimal_arm, rng=rng
        )
        save_matrix_csv(spec, args.out)
    elif args.kind == "random-matrix":
        params = InstanceParams(
            n_arms=args.arms, budget=args.budget, cost_min=args.cost_min
        )
        spec = random_matrix_spec(params, rng, cost_jitter=args.cost_jitter)
        save_matrix_csv(spec, args.out)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown kind {args.kind!r}")
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwklab",
        description="Budgeted bandit experiment runner: seeded episodes, "
        "regret sweeps over budgets, CSV results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True, help="path to a JSON config")
    p_run.add_argument("--out", default=None, help="output file prefix")
    p_run.add_argument("--threads", type=int, default=1, help="worker processes")
    p_run.add_argument(
        "--emit-traces", action="store_true", help="also write per-episode trace CSVs"
    )
    p_run.set_defaults(func=_cmd_run)

    p_slope = sub.add_parser("slope", help="fit the log-log budget scaling exponent")
    p_slope.add_argument("summary", help="path to a *_summary.csv file")
    p_slope.set_defaults(func=_cmd_slope)

    p_gen = sub.add_parser("gen-env", help="generate an environment file")
    p_gen.add_argument(
        "--kind",
        required=True,
        choices=["hidden-best-arm", "big-cost-trap", "random-matrix"],
    )
    p_gen.add_argument("--out", required=True, help="output file path")
    p_gen.add_argument("--budget", type=float, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--arms", type=int, default=2)
    p_gen.add_argument("--cost-min", type=float, default=1.0)
    p_gen.add_argument("--alpha", type=float, default=0.5)
    p_gen.add_argument("--optimal-arm", type=int, default=None)
    p_gen.add_argument("--cost-jitter", type=float, default=None)
    p_gen.set_defaults(func=_cmd_gen_env)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
