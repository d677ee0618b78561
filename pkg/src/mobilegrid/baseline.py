"""Comparison policies: no offloading at all, and equal-share buying."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Consumer, Task, local_makespan
from .partition import load_split
from .spg import Equilibrium, PricingProblem

NONPARALLEL = "nonparallel"
ESE = "ese"


@dataclass(frozen=True)
class BaselineResult:
    """Outcome of a baseline policy on one scenario."""
    policy: str
    makespan: float
    time_saved: float
    amounts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.amounts, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "amounts", arr)


def nonparallel_schedule(task: Task, consumer: Consumer) -> BaselineResult:
    """Run everything locally; saves nothing by definition."""
    return BaselineResult(
        policy=NONPARALLEL,
        makespan=local_makespan(task, consumer),
        time_saved=0.0,
        amounts=np.zeros(0),
    )


def ese_budget_from_equilibrium(equilibrium: Equilibrium) -> float:
    """Equal-share budget: the mean bought amount of a solved game."""
    return float(np.mean(equilibrium.amounts))


def ese_schedule(problem: PricingProblem, amount: float) -> BaselineResult:
    """Buy the same amount from every provider, clipped at each provider's cap.

    The split and makespan then follow from the same balanced partition the
    game uses, so the comparison isolates how the budget is distributed.
    """
    if amount < 0.0:
        raise ValueError(f"equal-share amount must be nonnegative, got {amount}")
    amounts = np.minimum(amount, problem.caps)
    split = load_split(problem.computing_volume, problem.data_volume,
                       problem.consumer_capacity, amounts, problem.rates)
    return BaselineResult(
        policy=ESE,
        makespan=split.makespan,
        time_saved=split.time_saved,
        amounts=amounts,
    )
