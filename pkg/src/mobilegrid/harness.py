"""Monte-Carlo experiment driver: single trials, provider-count sweeps, traces.

One trial is the full pipeline: place providers, calibrate power, allocate
resource blocks, average fading into effective rates, solve the pricing game,
split the load and score the makespan against running locally. Both RB
schedulers are evaluated on the same placement and the same fading table, and
the equal-share baseline reuses the round-robin branch (budget = mean bought
amount of its equilibrium), so per-trial comparisons are paired.

Reproducibility: trial seeds derive from the master seed by the documented
split trial_seed = SeedSequence(master, spawn_key=(n_providers, trial_index));
inside a trial, placement / scheduling / fading use fixed independent
substreams of the trial seed. Trials run sequentially in a fixed order, so
sweep output is byte-reproducible. (They are independent and could be farmed
out, as long as results are reduced in trial order.)
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import baseline, channel, rb_sched, spg
from .model import (SCHEDULING_STREAM, FADING_STREAM, ScenarioConfig,
                    build_scenario, local_makespan, read_flat_mapping, substream)

POLICY_SPG_RR = "spg_round_robin"
POLICY_SPG_MW = "spg_max_weight"
POLICY_ESE = "ese"
SWEEP_POLICIES = (POLICY_SPG_RR, POLICY_SPG_MW, POLICY_ESE)

RB_POLICIES = ("round_robin", "max_weight")
_SPG_POLICY = {"round_robin": POLICY_SPG_RR, "max_weight": POLICY_SPG_MW}


@dataclass(frozen=True)
class ExperimentConfig:
    """Scenario knobs plus solver and sweep settings; flat in config files."""
    scenario: ScenarioConfig = ScenarioConfig()
    rb_policy: str = "round_robin"
    price_init: float = 0.1
    tol: float = 1e-4
    max_iter: int = 500
    k_min: int = 3
    k_max: int = 12
    trials_per_k: int = 500

    def __post_init__(self):
        object.__setattr__(self, "price_init", float(self.price_init))
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "max_iter", int(self.max_iter))
        object.__setattr__(self, "k_min", int(self.k_min))
        object.__setattr__(self, "k_max", int(self.k_max))
        object.__setattr__(self, "trials_per_k", int(self.trials_per_k))

    def validate(self):
        self.scenario.validate()
        if self.rb_policy not in RB_POLICIES:
            raise ValueError(f"rb_policy must be one of {RB_POLICIES}, got {self.rb_policy!r}")
        if self.price_init <= 0.0:
            raise ValueError(f"initial price must be positive, got {self.price_init}")
        if self.tol <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError(f"bad provider range {self.k_min}..{self.k_max}")
        if self.trials_per_k < 1:
            raise ValueError(f"trials_per_k must be >= 1, got {self.trials_per_k}")


def load_config(path) -> ExperimentConfig:
    """Build an ExperimentConfig from a flat .json/.toml key-value file."""
    return config_from_mapping(read_flat_mapping(path))


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    scen_keys = set(ScenarioConfig.field_names())
    exp_keys = {f.name for f in fields(ExperimentConfig)} - {"scenario"}
    scen_kv, exp_kv = {}, {}
    unknown = []
    for key, value in mapping.items():
        if key in scen_keys:
            scen_kv[key] = value
        elif key in exp_keys:
            exp_kv[key] = value
        else:
            unknown.append(key)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    config = ExperimentConfig(scenario=ScenarioConfig(**scen_kv), **exp_kv)
    config.validate()
    return config


@dataclass(frozen=True)
class TrialResult:
    """One (scenario, policy) outcome with its equilibrium summary."""
    policy: str
    seed: int
    n_providers: int
    trial_index: int
    t_local: float
    makespan: float
    time_saved: float
    saved_ratio: float
    iterations: int
    converged: bool
    beta0: float
    amounts: tuple
    prices: tuple | None
    buyer_utility: float | None


def trial_seed(master_seed: int, n_providers: int, trial_index: int) -> int:
    """Per-trial 64-bit seed: SeedSequence(master, spawn_key=(K, index))."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(n_providers, trial_index))
    return int(seq.generate_state(1, np.uint64)[0])


def _allocations(scenario, seed):
    sched_rng = substream(seed, SCHEDULING_STREAM)
    one_draw = channel.rb_rate_draw(scenario, sched_rng)
    return {
        "round_robin": rb_sched.round_robin(scenario.n_rb, scenario.n_providers),
        "max_weight": rb_sched.max_weight(one_draw),
    }


def run_trial_bundle(config: ExperimentConfig, seed: int | None = None,
                     n_providers: int | None = None, trial_index: int = 0) -> dict:
    """Evaluate all sweep policies on one shared scenario and fading table."""
    config.validate()
    scen_cfg = config.scenario
    if seed is None:
        seed = scen_cfg.rng_seed
    overrides = {"rng_seed": int(seed)}
    if n_providers is not None:
        overrides["n_providers"] = int(n_providers)
    scen_cfg = replace(scen_cfg, **overrides)
    scen_cfg.validate()
    scenario = build_scenario(scen_cfg)

    allocations = _allocations(scenario, seed)
    # one shared fading table; summing its per-RB means over an allocation is
    # exactly channel.effective_rates for that allocation
    se_mean = channel.mean_rb_spectral_efficiency(
        scenario, substream(seed, FADING_STREAM), scen_cfg.n_fading_draws)
    t_local = local_makespan(scenario.task, scenario.consumer)

    results = {}
    equilibria = {}
    for rb_policy, alloc in allocations.items():
        rates = scenario.rb_bandwidth * (alloc.matrix * se_mean).sum(axis=0)
        problem = spg.PricingProblem.from_scenario(scenario, rates)
        eq = spg.solve_equilibrium(problem, price_init=config.price_init,
                                   tol=config.tol, max_iter=config.max_iter)
        equilibria[rb_policy] = (problem, eq)
        results[_SPG_POLICY[rb_policy]] = TrialResult(
            policy=_SPG_POLICY[rb_policy],
            seed=int(seed),
            n_providers=scenario.n_providers,
            trial_index=trial_index,
            t_local=float(t_local),
            makespan=float(eq.split.makespan),
            time_saved=float(eq.split.time_saved),
            saved_ratio=float(eq.split.time_saved / t_local),
            iterations=eq.iterations_used,
            converged=eq.converged,
            beta0=float(eq.split.beta0),
            amounts=tuple(float(a) for a in eq.amounts),
            prices=tuple(float(p) for p in eq.prices),
            buyer_utility=float(eq.buyer_utility),
        )

    rr_problem, rr_eq = equilibria["round_robin"]
    budget = baseline.ese_budget_from_equilibrium(rr_eq)
    ese = baseline.ese_schedule(rr_problem, budget)
    results[POLICY_ESE] = TrialResult(
        policy=POLICY_ESE,
        seed=int(seed),
        n_providers=scenario.n_providers,
        trial_index=trial_index,
        t_local=float(t_local),
        makespan=float(ese.makespan),
        time_saved=float(ese.time_saved),
        saved_ratio=float(ese.time_saved / t_local),
        iterations=0,
        converged=rr_eq.converged,  # budget quality inherits from the source run
        beta0=float(1.0 - ese.time_saved / t_local),
        amounts=tuple(float(a) for a in ese.amounts),
        prices=None,
        buyer_utility=None,
    )
    return results


def run_trial(config: ExperimentConfig, seed: int | None = None,
              n_providers: int | None = None, rb_policy: str | None = None) -> TrialResult:
    """One full pipeline run for the configured (or given) RB policy."""
    rb_policy = rb_policy or config.rb_policy
    if rb_policy not in RB_POLICIES:
        raise ValueError(f"rb_policy must be one of {RB_POLICIES}, got {rb_policy!r}")
    bundle = run_trial_bundle(config, seed=seed, n_providers=n_providers)
    return bundle[_SPG_POLICY[rb_policy]]


@dataclass(frozen=True)
class AggregateStat:
    """Saved-ratio statistics for one (provider count, policy) cell."""
    n_providers: int
    policy: str
    n_trials: int
    mean: float
    std: float
    stderr: float
    n_converged: int


@dataclass(frozen=True)
class SweepResult:
    """Full provider-count sweep: per-trial records plus per-cell aggregates."""
    master_seed: int
    k_values: tuple
    trials_per_k: int
    policies: tuple
    records: tuple
    stats: dict

    def stat(self, n_providers: int, policy: str) -> AggregateStat:
        return self.stats[(n_providers, policy)]


def sweep_rp_count(config: ExperimentConfig, k_range=None,
                   trials_per_k: int | None = None, progress=None) -> SweepResult:
    """Run trials_per_k seeded trials at every provider count in k_range."""
    config.validate()
    if k_range is None:
        k_range = range(config.k_min, config.k_max + 1)
    k_values = tuple(int(k) for k in k_range)
    if not k_values:
        raise ValueError("empty provider-count range")
    trials = config.trials_per_k if trials_per_k is None else int(trials_per_k)
    if trials < 1:
        raise ValueError(f"need at least one trial per K, got {trials}")
    master = config.scenario.rng_seed

    records = []
    for k in k_values:
        for i in range(trials):
            bundle = run_trial_bundle(config, seed=trial_seed(master, k, i),
                                      n_providers=k, trial_index=i)
            for policy in SWEEP_POLICIES:
                records.append(bundle[policy])
        if progress is not None:
            progress(k)

    stats = {}
    for k in k_values:
        for policy in SWEEP_POLICIES:
            ratios = np.array([r.saved_ratio for r in records
                               if r.n_providers == k and r.policy == policy])
            stats[(k, policy)] = AggregateStat(
                n_providers=k,
                policy=policy,
                n_trials=len(ratios),
                mean=float(ratios.mean()),
                std=float(ratios.std()),
                stderr=float(ratios.std() / np.sqrt(len(ratios))),
                n_converged=sum(r.converged for r in records
                                if r.n_providers == k and r.policy == policy),
            )
    return SweepResult(
        master_seed=master,
        k_values=k_values,
        trials_per_k=trials,
        policies=SWEEP_POLICIES,
        records=tuple(records),
        stats=stats,
    )


def solve_scenario(config: ExperimentConfig, seed: int | None = None,
                   n_providers: int | None = None, rb_policy: str | None = None):
    """Run the pipeline once, keeping the problem and equilibrium objects.

    Returns (scenario, problem, equilibrium); numerically identical to the
    matching entry of run_trial_bundle (same substreams, same draw order).
    """
    config.validate()
    rb_policy = rb_policy or config.rb_policy
    if rb_policy not in RB_POLICIES:
        raise ValueError(f"rb_policy must be one of {RB_POLICIES}, got {rb_policy!r}")
    scen_cfg = config.scenario
    overrides = {}
    if seed is not None:
        overrides["rng_seed"] = int(seed)
    if n_providers is not None:
        overrides["n_providers"] = int(n_providers)
    if overrides:
        scen_cfg = replace(scen_cfg, **overrides)
    scenario = build_scenario(scen_cfg)
    alloc = _allocations(scenario, scen_cfg.rng_seed)[rb_policy]
    rates = channel.effective_rates(
        scenario, alloc, substream(scen_cfg.rng_seed, FADING_STREAM),
        scen_cfg.n_fading_draws)
    problem = spg.PricingProblem.from_scenario(scenario, rates)
    eq = spg.solve_equilibrium(problem, price_init=config.price_init,
                               tol=config.tol, max_iter=config.max_iter)
    return scenario, problem, eq


def convergence_trace(config: ExperimentConfig, out_path,
                      seed: int | None = None) -> spg.Equilibrium:
    """Solve one scenario and write its per-iteration trace CSV."""
    _, _, eq = solve_scenario(config, seed=seed)
    spg.write_trace_csv(eq, out_path)
    return eq


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(float(value))  # plain float: numpy scalars repr differently
    return str(value)


def write_trials_csv(records, path) -> Path:
    """One row per (trial, policy) with the equilibrium summarized."""
    header = ["policy", "n_providers", "trial_index", "seed", "t_local", "makespan",
              "time_saved", "saved_ratio", "iterations", "converged", "beta0",
              "mean_price", "mean_amount"]
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            mean_price = float(np.mean(r.prices)) if r.prices else None
            mean_amount = float(np.mean(r.amounts)) if len(r.amounts) else 0.0
            writer.writerow([_fmt(x) for x in (
                r.policy, r.n_providers, r.trial_index, r.seed, r.t_local,
                r.makespan, r.time_saved, r.saved_ratio, r.iterations,
                r.converged, r.beta0, mean_price, mean_amount)])
    return path


def write_aggregate_csv(sweep: SweepResult, path) -> Path:
    """One row per (provider count, policy): mean/std/stderr of the saved ratio."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n_providers", "policy", "n_trials", "n_converged",
                         "mean_saved_ratio", "std_saved_ratio", "stderr_saved_ratio"])
        for k in sweep.k_values:
            for policy in sweep.policies:
                st = sweep.stat(k, policy)
                writer.writerow([_fmt(x) for x in (
                    k, policy, st.n_trials, st.n_converged, st.mean, st.std,
                    st.stderr)])
    return path


def write_summary_json(sweep: SweepResult, path) -> Path:
    """Machine-readable sweep summary (aggregates only, no per-trial rows)."""
    summary = {
        "master_seed": sweep.master_seed,
        "k_values": list(sweep.k_values),
        "trials_per_k": sweep.trials_per_k,
        "policies": list(sweep.policies),
        "stats": {
            f"{k}/{policy}": asdict(sweep.stat(k, policy))
            for k in sweep.k_values for policy in sweep.policies
        },
    }
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
