"""Closed-form divisible-load splitting and makespan accounting.

The optimal split equalizes the consumer's compute time with every
contributing provider's transmit-plus-compute time; the closed forms below
are the unique solution of that balance together with the normalization
that all fractions sum to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LoadSplit:
    """A full load partition: consumer fraction, provider fractions, timing."""
    beta0: float
    fractions: np.ndarray
    makespan: float
    time_saved: float
    time_saved_unclipped: float

    def __post_init__(self):
        frac = np.asarray(self.fractions, dtype=float)
        frac.flags.writeable = False
        object.__setattr__(self, "fractions", frac)
        total = self.beta0 + frac.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {total}, not 1")
        if not 0.0 <= self.beta0 <= 1.0 or ((frac < 0) | (frac > 1)).any():
            raise ValueError("load fractions must lie in [0, 1]")


def single_rp_split(computing_volume, balance_factor, consumer_capacity,
                    provider_capacity, rate) -> float:
    """Optimal offload fraction for one provider.

    beta* = R*C_v*V / (S*C_v*C_c + R*C_c*V + R*C_v*V) with S = gamma*V.
    A provider with no capacity or no rate gets nothing.
    """
    v = computing_volume
    s = balance_factor * v
    if provider_capacity <= 0.0 or rate <= 0.0:
        return 0.0
    den = (s * provider_capacity * consumer_capacity
           + rate * consumer_capacity * v
           + rate * provider_capacity * v)
    if den == 0.0:
        return 0.0
    return rate * provider_capacity * v / den


def single_rp_makespan(fraction, computing_volume, balance_factor,
                       provider_capacity, rate) -> float:
    """Provider-side completion time: transmit beta*S/R plus compute beta*V/C_v.

    Offloading a positive share over a zero-rate link or to a zero-capacity
    provider never finishes: the result is +inf, not an exception.
    """
    v = computing_volume
    transmit_volume = fraction * balance_factor * v
    compute_volume = fraction * v
    transmit = 0.0 if transmit_volume == 0.0 else (
        math.inf if rate <= 0.0 else transmit_volume / rate)
    compute = 0.0 if compute_volume == 0.0 else (
        math.inf if provider_capacity <= 0.0 else compute_volume / provider_capacity)
    return transmit + compute


def time_saved_single(fraction, computing_volume, balance_factor,
                      consumer_capacity, provider_capacity, rate) -> float:
    """Time saved vs. running locally, clipped at zero.

    The completed-at time is the slower of the consumer's remaining share and
    the provider's transmit-plus-compute path, so offloading nothing (or too
    much) saves nothing.
    """
    t_local = computing_volume / consumer_capacity
    consumer_time = (1.0 - fraction) * computing_volume / consumer_capacity
    provider_time = single_rp_makespan(fraction, computing_volume, balance_factor,
                                       provider_capacity, rate)
    return max(t_local - max(consumer_time, provider_time), 0.0)


def _term(v, s, c_c, amount, rate) -> float:
    # V*R_j*C_j / (S*C_c*C_j + V*C_c*R_j); absent providers contribute zero
    if amount <= 0.0 or rate <= 0.0:
        return 0.0
    return v * rate * amount / (s * c_c * amount + v * c_c * rate)


def multi_beta0(computing_volume, data_volume, consumer_capacity,
                amounts, rates) -> float:
    """Consumer's own fraction: 1 / (1 + sum of per-provider balance terms)."""
    v, s, c_c = computing_volume, data_volume, consumer_capacity
    total = sum(_term(v, s, c_c, c, r) for c, r in zip(amounts, rates))
    return 1.0 / (1.0 + total)


def multi_beta_j(beta0, computing_volume, data_volume, consumer_capacity,
                 amount, rate) -> float:
    """One provider's fraction: beta0 * V*R_j*C_j / (S*C_c*C_j + V*C_c*R_j)."""
    return beta0 * _term(computing_volume, data_volume, consumer_capacity,
                         amount, rate)


def time_saved_multi(beta0, computing_volume, consumer_capacity) -> float:
    """Time saved by the cooperative run: (1 - beta0) * V / C_c, clipped at 0."""
    return max((1.0 - beta0) * computing_volume / consumer_capacity, 0.0)


def load_split(computing_volume, data_volume, consumer_capacity,
               amounts, rates) -> LoadSplit:
    """Balanced split for the given bought amounts and rates.

    All contributing providers finish exactly when the consumer does, so the
    makespan is the consumer's compute time beta0 * V / C_c.
    """
    v, s, c_c = computing_volume, data_volume, consumer_capacity
    beta0 = multi_beta0(v, s, c_c, amounts, rates)
    fractions = np.array([multi_beta_j(beta0, v, s, c_c, c, r)
                          for c, r in zip(amounts, rates)])
    makespan = beta0 * v / c_c
    raw = v / c_c - makespan
    return LoadSplit(beta0=beta0, fractions=fractions, makespan=makespan,
                     time_saved=max(raw, 0.0), time_saved_unclipped=raw)


def balance_residuals(split: LoadSplit, computing_volume, data_volume,
                      consumer_capacity, amounts, rates) -> np.ndarray:
    """Per-provider |consumer time - (transmit + compute) time| for contributors.

    Zero entries for providers that received no load.
    """
    v, s = computing_volume, data_volume
    consumer_time = split.beta0 * v / consumer_capacity
    res = np.zeros(len(split.fractions))
    for j, (frac, c, r) in enumerate(zip(split.fractions, amounts, rates)):
        if c > 0.0 and r > 0.0 and frac > 0.0:
            res[j] = abs(consumer_time - (frac * s / r + frac * v / c))
    return res
