"""Command-line front end: solve one scenario, dump a trace, or run a sweep."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness


def _parse_k_range(text: str):
    try:
        lo, hi = text.split("..")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise ValueError(f"bad provider range {text!r}, expected A..B") from None
    if not 1 <= lo <= hi:
        raise ValueError(f"bad provider range {text!r}")
    return lo, hi


def _load_config(args) -> harness.ExperimentConfig:
    if args.config:
        config = harness.load_config(args.config)
    else:
        config = harness.ExperimentConfig()
    scen = config.scenario
    if args.seed is not None:
        scen = replace(scen, rng_seed=args.seed)
    overrides = {"scenario": scen}
    if args.rb_policy:
        overrides["rb_policy"] = args.rb_policy
    if args.tol is not None:
        overrides["tol"] = args.tol
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    if getattr(args, "k_range", None):
        lo, hi = _parse_k_range(args.k_range)
        overrides.update(k_min=lo, k_max=hi)
    if getattr(args, "trials", None):
        overrides["trials_per_k"] = args.trials
    config = replace(config, **overrides)
    config.validate()
    return config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_solve(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    result = harness.run_trial(config)
    payload = {
        "seed": result.seed,
        "n_providers": result.n_providers,
        "rb_policy": config.rb_policy,
        "t_local": result.t_local,
        "makespan": result.makespan,
        "time_saved": result.time_saved,
        "saved_ratio": result.saved_ratio,
        "iterations": result.iterations,
        "converged": result.converged,
        "beta0": result.beta0,
        "prices": list(result.prices),
        "amounts": list(result.amounts),
        "buyer_utility": result.buyer_utility,
    }
    path = out / "equilibrium.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    print(f"converged={result.converged} iterations={result.iterations} "
          f"saved_ratio={result.saved_ratio:.4f}")
    return 0


def _cmd_trace(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    path = out / "trace.csv"
    eq = harness.convergence_trace(config, path)
    print(f"wrote {path}")
    print(f"converged={eq.converged} iterations={eq.iterations_used}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    sweep = harness.sweep_rp_count(
        config, progress=lambda k: print(f"finished K={k}", flush=True))
    trials_path = harness.write_trials_csv(sweep.records, out / "sweep_trials.csv")
    agg_path = harness.write_aggregate_csv(sweep, out / "sweep_aggregate.csv")
    json_path = harness.write_summary_json(sweep, out / "sweep_summary.json")
    for path in (trials_path, agg_path, json_path):
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobilegrid",
        description="Stackelberg-priced divisible-load scheduling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat .json or .toml config file")
        p.add_argument("--seed", type=int, help="override the master RNG seed")
        p.add_argument("--rb-policy", choices=harness.RB_POLICIES,
                       help="resource-block scheduler")
        p.add_argument("--tol", type=float, help="price/amount stopping tolerance")
        p.add_argument("--max-iter", type=int, help="iteration cap of the solver")
        p.add_argument("--out", default=".", help="output directory")

    p_solve = sub.add_parser("solve", help="solve one scenario, write equilibrium.json")
    common(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_trace = sub.add_parser("trace", help="write the per-iteration trace CSV")
    common(p_trace)
    p_trace.set_defaults(func=_cmd_trace)

    p_sweep = sub.add_parser("sweep", help="sweep the provider count, write CSVs")
    common(p_sweep)
    p_sweep.add_argument("--k-range", help="provider counts, e.g. 3..12")
    p_sweep.add_argument("--trials", type=int, help="trials per provider count")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
