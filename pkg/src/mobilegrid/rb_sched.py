"""Allocation of transmission resource blocks to providers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Allocation:
    """Binary RB-to-provider assignment; each RB goes to at most one provider."""
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.int8)
        if mat.ndim != 2:
            raise ValueError("allocation must be a (n_rb, n_providers) matrix")
        if not np.isin(mat, (0, 1)).all():
            raise ValueError("allocation entries must be 0 or 1")
        if (mat.sum(axis=1) > 1).any():
            raise ValueError("a resource block is assigned to more than one provider")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def n_rb(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_providers(self) -> int:
        return self.matrix.shape[1]

    def rb_counts(self) -> np.ndarray:
        """Number of RBs held by each provider."""
        return self.matrix.sum(axis=0)


def round_robin(n_rb: int, n_providers: int) -> Allocation:
    """RB k goes to provider k mod K; counts differ by at most one."""
    if n_rb < 1 or n_providers < 1:
        raise ValueError("need at least one RB and one provider")
    mat = np.zeros((n_rb, n_providers), dtype=np.int8)
    mat[np.arange(n_rb), np.arange(n_rb) % n_providers] = 1
    return Allocation(mat)


def max_weight(rb_rates, weights=None) -> Allocation:
    """Each RB goes to the provider maximizing weight * rate on that RB.

    rb_rates is (n_rb, n_providers); weights default to uniform (one-shot
    scheduling before the game). Ties break to the lowest provider index.
    The winner is invariant under positive scaling of the whole weight vector.
    """
    rb_rates = np.asarray(rb_rates, dtype=float)
    if rb_rates.ndim != 2:
        raise ValueError("rb_rates must be a (n_rb, n_providers) matrix")
    n_rb, k = rb_rates.shape
    if weights is None:
        weights = np.ones(k)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (k,):
        raise ValueError(f"need one weight per provider, got shape {weights.shape}")
    if (rb_rates < 0).any() or (weights < 0).any():
        raise ValueError("rates and weights must be nonnegative")
    winners = np.argmax(weights * rb_rates, axis=1)
    mat = np.zeros((n_rb, k), dtype=np.int8)
    mat[np.arange(n_rb), winners] = 1
    return Allocation(mat)
