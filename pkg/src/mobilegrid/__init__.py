"""Stackelberg-priced divisible-load scheduling in a mobile grid.

A consumer partitions a divisible task across mobile providers reached over a
shared wireless uplink. Providers sell compute at prices found by a two-level
pricing game; the library exposes the channel model, RB schedulers, the
closed-form load partition, the game solver, baselines and a seeded
Monte-Carlo harness with a CLI.
"""
from .baseline import BaselineResult, ese_budget_from_equilibrium, ese_schedule, nonparallel_schedule
from .channel import (LinkState, McsTable, calibrate_power, draw_fading, effective_rates,
                      fading_power, mean_rb_spectral_efficiency, multi_rp_rate, pathloss,
                      rb_rate_draw, shannon_efficiency, single_link_rate, snr_scales)
from .harness import (AggregateStat, ExperimentConfig, SweepResult, TrialResult,
                      convergence_trace, load_config, run_trial, run_trial_bundle,
                      solve_scenario, sweep_rp_count, trial_seed)
from .model import (Consumer, Provider, Scenario, ScenarioConfig, Task, build_scenario,
                    local_makespan, substream)
from .partition import (LoadSplit, balance_residuals, load_split, multi_beta0, multi_beta_j,
                        single_rp_makespan, single_rp_split, time_saved_multi,
                        time_saved_single)
from .rb_sched import Allocation, max_weight, round_robin
from .spg import (AuxCoefficients, BestResponseError, Equilibrium, GameState,
                  PricingProblem, TraceRow, aux_coefficients, buyer_best_response,
                  buyer_gradient, buyer_utility, price_derivative, seller_price_update,
                  seller_utility, solve_equilibrium, write_trace_csv)

__version__ = "0.1.0"
