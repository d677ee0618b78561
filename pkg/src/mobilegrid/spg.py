"""Stackelberg pricing game between the resource consumer and the providers.

The consumer (buyer) picks bought amounts maximizing time saved minus payment
for the posted prices; each provider (seller, the leader for its own price)
prices against the buyer's closed-form response. Alternating these two updates
is a fixed-point iteration on the price vector; its limit is the equilibrium.

Coupling detail: the buyer's closed-form amount for provider j depends on the
other amounts through a cross term, so the buyer step is itself solved to a
fixed point by Gauss-Seidel sweeps (the joint utility is concave, making that
inner optimum unique).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .partition import LoadSplit, load_split, multi_beta0

if TYPE_CHECKING:
    from .model import Scenario


@dataclass(frozen=True)
class PricingProblem:
    """Everything the game needs: task, consumer capacity, per-provider data."""
    computing_volume: float
    data_volume: float
    consumer_capacity: float
    rates: np.ndarray
    caps: np.ndarray
    cost_coeffs: np.ndarray
    tradeoff_exps: np.ndarray

    def __post_init__(self):
        for name in ("rates", "caps", "cost_coeffs", "tradeoff_exps"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.shape != np.shape(self.rates):
                raise ValueError("per-provider arrays must share one length")
            if (arr < 0).any():
                raise ValueError(f"{name} must be nonnegative")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.computing_volume < 0 or self.data_volume < 0:
            raise ValueError("task volumes must be nonnegative")
        if self.consumer_capacity <= 0:
            raise ValueError("consumer capacity must be positive")

    @classmethod
    def from_scenario(cls, scenario: "Scenario", rates) -> "PricingProblem":
        return cls(
            computing_volume=scenario.task.computing_volume,
            data_volume=scenario.task.data_volume,
            consumer_capacity=scenario.consumer.own_capacity,
            rates=np.asarray(rates, dtype=float),
            caps=np.array([p.max_scr for p in scenario.providers]),
            cost_coeffs=np.array([p.cost_coeff for p in scenario.providers]),
            tradeoff_exps=np.array([p.tradeoff_exp for p in scenario.providers]),
        )

    @property
    def n_providers(self) -> int:
        return len(self.rates)


@dataclass(frozen=True)
class AuxCoefficients:
    """Closed-form response coefficients for one provider.

    The buyer's unconstrained optimum is u / sqrt(price) - v; w aggregates the
    other providers' bought amounts and is all that couples them.
    """
    u: float
    v: float
    w: float


@dataclass(frozen=True)
class TraceRow:
    """State after one iteration of the price-update map."""
    iteration: int
    prices: tuple
    amounts: tuple
    beta0: float
    buyer_utility: float
    seller_utilities: tuple


@dataclass
class GameState:
    """Mutable iteration state: current prices, amounts and the full trace."""
    prices: np.ndarray
    amounts: np.ndarray
    iteration: int = 0
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class Equilibrium:
    """Converged (or last-iterate) outcome of the pricing game."""
    prices: np.ndarray
    amounts: np.ndarray
    split: LoadSplit
    buyer_utility: float
    seller_utilities: np.ndarray
    iterations_used: int
    converged: bool
    residual: float
    trace: tuple


class BestResponseError(RuntimeError):
    """Inner best-response sweeps failed to settle; carries the last iterate."""

    def __init__(self, message, amounts, residual):
        super().__init__(message)
        self.amounts = np.asarray(amounts)
        self.residual = residual


def _x_term(v, s, c_c, amount, rate) -> float:
    # V*R*C / (S*C_c*C + V*C_c*R), the balance term one provider adds
    if amount <= 0.0 or rate <= 0.0:
        return 0.0
    return v * rate * amount / (s * c_c * amount + v * c_c * rate)


def buyer_utility(problem: PricingProblem, amounts, prices) -> float:
    """Time saved by the split minus the total payment (time saved unclipped)."""
    amounts = np.asarray(amounts, dtype=float)
    prices = np.asarray(prices, dtype=float)
    beta0 = multi_beta0(problem.computing_volume, problem.data_volume,
                        problem.consumer_capacity, amounts, problem.rates)
    saved = (1.0 - beta0) * problem.computing_volume / problem.consumer_capacity
    return saved - float(prices @ amounts)


def seller_utility(price, amount, cost_coeff, tradeoff_exp) -> float:
    """Provider profit (price - cost) * amount^b; zero when nothing is sold."""
    if amount <= 0.0:
        return 0.0
    return (price - cost_coeff) * amount ** tradeoff_exp


def aux_coefficients(problem: PricingProblem, amounts, j: int) -> AuxCoefficients:
    """Response coefficients (u_j, v_j, w_j) given the other bought amounts."""
    v = problem.computing_volume
    s = problem.data_volume
    c_c = problem.consumer_capacity
    w = sum(_x_term(v, s, c_c, amounts[i], problem.rates[i])
            for i in range(problem.n_providers) if i != j)
    r = problem.rates[j]
    den = s * c_c + v * r + s * c_c * w
    if r <= 0.0 or den <= 0.0:
        return AuxCoefficients(0.0, 0.0, w)
    return AuxCoefficients(
        u=v * r * math.sqrt(v) / den,
        v=v * c_c * r * (1.0 + w) / den,
        w=w,
    )


def buyer_gradient(problem: PricingProblem, amounts, prices, j: int) -> float:
    """d(buyer utility)/d(amount_j): beta0^2 V^3 R_j^2 / (S C_c C_j + V C_c R_j)^2 - price_j."""
    v = problem.computing_volume
    s = problem.data_volume
    c_c = problem.consumer_capacity
    r = problem.rates[j]
    marginal = 0.0
    if r > 0.0:
        beta0 = multi_beta0(v, s, c_c, amounts, problem.rates)
        den = s * c_c * amounts[j] + v * c_c * r
        marginal = beta0 ** 2 * v ** 3 * r ** 2 / den ** 2
    return marginal - prices[j]


def buyer_best_response(problem: PricingProblem, prices, start=None,
                        inner_tol: float = 1e-9, max_sweeps: int = 200) -> np.ndarray:
    """Joint maximizer of the buyer utility over the box [0, cap_j]^K.

    Gauss-Seidel: sweep providers in index order applying the clamped closed
    form with the cross term recomputed from the latest amounts, until no
    amount moves by more than inner_tol. Concavity makes the limit the unique
    box-constrained optimum regardless of the starting point.
    """
    k = problem.n_providers
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (k,):
        raise ValueError(f"need one price per provider, got shape {prices.shape}")
    if (prices <= 0.0).any():
        raise ValueError("prices must be positive")
    v = problem.computing_volume
    s = problem.data_volume
    c_c = problem.consumer_capacity
    rates = problem.rates.tolist()
    caps = problem.caps.tolist()
    sqrt_v = math.sqrt(v)
    sc = s * c_c

    if start is None:
        amounts = [0.0] * k
    else:
        amounts = [min(max(float(a), 0.0), caps[i]) for i, a in enumerate(start)]
    x = [_x_term(v, s, c_c, amounts[i], rates[i]) for i in range(k)]

    inv_sqrt_prices = [1.0 / math.sqrt(p) for p in prices]
    residual = math.inf
    for _ in range(max_sweeps):
        total = sum(x)  # refresh to avoid incremental drift
        residual = 0.0
        for j in range(k):
            r = rates[j]
            if r <= 0.0 or caps[j] <= 0.0:
                new = 0.0
            else:
                w = total - x[j]
                den = sc + v * r + sc * w
                if den <= 0.0:
                    new = 0.0
                else:
                    u = v * r * sqrt_v / den
                    vv = v * c_c * r * (1.0 + w) / den
                    new = u * inv_sqrt_prices[j] - vv
                    if new < 0.0:
                        new = 0.0
                    elif new > caps[j]:
                        new = caps[j]
            step = abs(new - amounts[j])
            if step > residual:
                residual = step
            amounts[j] = new
            x_new = _x_term(v, s, c_c, new, r)
            total += x_new - x[j]
            x[j] = x_new
        if residual <= inner_tol:
            return np.array(amounts)
    raise BestResponseError(
        f"best response did not settle within {max_sweeps} sweeps "
        f"(last step {residual:.3e})", amounts, residual)


def price_derivative(u: float, price: float) -> float:
    """d(amount)/d(price) of the interior closed form, cross term held fixed."""
    if price <= 0.0:
        raise ValueError("price must be positive")
    return -0.5 * u / (price * math.sqrt(price))


def seller_price_update(amount, price, cost_coeff, tradeoff_exp, u) -> float:
    """One seller's profit-stationary price against the buyer's response.

    Solves amount + b * d(amount)/d(price) * (price - cost) = 0 with the
    interior response derivative, giving cost + 2*amount*price^(3/2)/(b*u);
    the result never undercuts the seller's own cost. An unsold provider keeps
    its price (the stationarity equation degenerates there), which lets it
    re-enter if the others' behavior changes. The interior derivative is used
    even for a cap-clamped amount: it keeps the update map continuous and the
    clamp reapplies on the next buyer step.
    """
    if amount <= 0.0:
        return price
    if u <= 0.0:
        raise RuntimeError("positive amount with a zero response coefficient")
    return cost_coeff + 2.0 * amount * price * math.sqrt(price) / (tradeoff_exp * u)


def _trace_row(problem: PricingProblem, iteration, prices, amounts) -> TraceRow:
    beta0 = multi_beta0(problem.computing_volume, problem.data_volume,
                        problem.consumer_capacity, amounts, problem.rates)
    sellers = tuple(
        seller_utility(prices[j], amounts[j], problem.cost_coeffs[j],
                       problem.tradeoff_exps[j])
        for j in range(problem.n_providers))
    return TraceRow(
        iteration=iteration,
        prices=tuple(float(p) for p in prices),
        amounts=tuple(float(a) for a in amounts),
        beta0=float(beta0),
        buyer_utility=float(buyer_utility(problem, amounts, prices)),
        seller_utilities=tuple(float(u) for u in sellers),
    )


def solve_equilibrium(problem: PricingProblem, price_init=0.1, tol: float = 1e-4,
                      max_iter: int = 500, inner_tol: float = 1e-9,
                      max_sweeps: int = 200, polish_tol: float = 1e-12,
                      polish_max: int = 300) -> Equilibrium:
    """Alternate buyer and seller updates until prices and amounts both settle.

    Stops (converged=True) once both infinity-norm deltas drop below tol;
    iterations_used reports that crossing. The iteration then continues down
    to polish_tol so the returned point is a numerically tight fixed point on
    which stationarity residuals are meaningful; the trace keeps those polish
    iterations too. Hitting max_iter first returns the last iterate with
    converged=False instead of raising.
    """
    k = problem.n_providers
    prices = np.broadcast_to(np.asarray(price_init, dtype=float), (k,)).copy()
    if (prices <= 0.0).any() or not np.isfinite(prices).all():
        raise ValueError("initial prices must be positive and finite")
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    v = problem.computing_volume
    s = problem.data_volume
    c_c = problem.consumer_capacity
    state = GameState(prices=prices, amounts=np.zeros(k))
    state.trace.append(_trace_row(problem, 0, state.prices, state.amounts))

    converged_at = None
    residual = math.inf
    while True:
        state.iteration += 1
        new_amounts = buyer_best_response(problem, state.prices, start=state.amounts,
                                          inner_tol=inner_tol, max_sweeps=max_sweeps)
        x = [_x_term(v, s, c_c, new_amounts[j], problem.rates[j]) for j in range(k)]
        total = sum(x)
        new_prices = np.empty(k)
        for j in range(k):
            # u_j as in aux_coefficients, with w_j = total - x_j
            w = total - x[j]
            r = problem.rates[j]
            den = s * c_c + v * r + s * c_c * w
            u = v * r * math.sqrt(v) / den if (r > 0.0 and den > 0.0) else 0.0
            new_prices[j] = seller_price_update(
                new_amounts[j], state.prices[j], problem.cost_coeffs[j],
                problem.tradeoff_exps[j], u)
        residual = max(
            float(np.max(np.abs(new_prices - state.prices))),
            float(np.max(np.abs(new_amounts - state.amounts))),
        )
        state.prices = new_prices
        state.amounts = new_amounts
        state.trace.append(_trace_row(problem, state.iteration, new_prices, new_amounts))
        if converged_at is None and residual < tol:
            converged_at = state.iteration
        if converged_at is not None:
            if residual < polish_tol or state.iteration - converged_at >= polish_max:
                break
        elif state.iteration >= max_iter:
            break

    converged = converged_at is not None
    split = load_split(v, s, c_c, state.amounts, problem.rates)
    last = state.trace[-1]
    return Equilibrium(
        prices=state.prices,
        amounts=state.amounts,
        split=split,
        buyer_utility=last.buyer_utility,
        seller_utilities=np.array(last.seller_utilities),
        iterations_used=converged_at if converged else state.iteration,
        converged=converged,
        residual=residual,
        trace=tuple(state.trace),
    )


def write_trace_csv(trace, path) -> Path:
    """One row per iteration: t, prices, amounts, beta_0, utilities."""
    rows = trace.trace if isinstance(trace, Equilibrium) else tuple(trace)
    if not rows:
        raise ValueError("empty trace")
    k = len(rows[0].prices)
    header = (["t"]
              + [f"price_{j + 1}" for j in range(k)]
              + [f"amount_{j + 1}" for j in range(k)]
              + ["beta_0", "buyer_utility"]
              + [f"seller_utility_{j + 1}" for j in range(k)])
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([row.iteration]
                            + [repr(float(p)) for p in row.prices]
                            + [repr(float(a)) for a in row.amounts]
                            + [repr(float(row.beta0)), repr(float(row.buyer_utility))]
                            + [repr(float(u)) for u in row.seller_utilities])
    return path
