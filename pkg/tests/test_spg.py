import csv
import math

import numpy as np
import pytest

from conftest import grid_best_response, grid_resolves_instance, random_problem

from mobilegrid.partition import multi_beta0
from mobilegrid.spg import (BestResponseError, PricingProblem, aux_coefficients,
                            buyer_best_response, buyer_gradient, buyer_utility,
                            price_derivative, seller_price_update, seller_utility,
                            solve_equilibrium, write_trace_csv)


def unit_problem(cap=10.0, eta=0.1, b=1.0):
    """V = S = C_c = R = 1; the response coefficients come out u = v = 0.5."""
    return PricingProblem(1.0, 1.0, 1.0, rates=[1.0], caps=[cap],
                          cost_coeffs=[eta], tradeoff_exps=[b])


def independent_buyer_utility(problem, amounts, prices):
    beta0 = multi_beta0(problem.computing_volume, problem.data_volume,
                        problem.consumer_capacity, amounts, problem.rates)
    saved = (1.0 - beta0) * problem.computing_volume / problem.consumer_capacity
    return saved - float(np.dot(prices, amounts))


# ---- utilities ----

def test_buyer_utility_zero_without_trade():
    p = unit_problem()
    assert buyer_utility(p, [0.0], [0.3]) == 0.0


def test_buyer_utility_free_offload_equals_time_saved():
    p = PricingProblem(100.0, 100.0, 10.0, rates=[10.0], caps=[10.0],
                       cost_coeffs=[0.05], tradeoff_exps=[1.0])
    got = buyer_utility(p, [10.0], [0.0])
    beta0 = multi_beta0(100.0, 100.0, 10.0, [10.0], [10.0])
    assert got == pytest.approx((1.0 - beta0) * 10.0)


def test_buyer_utility_matches_independent_recomputation():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = rng.integers(1, 6)
        p = random_problem(rng, k)
        amounts = rng.uniform(0.0, 1.0, k) * p.caps
        prices = rng.uniform(0.02, 1.0, k)
        assert buyer_utility(p, amounts, prices) == pytest.approx(
            independent_buyer_utility(p, amounts, prices), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("price,amount,eta,b,expected", [
    (0.5, 0.0, 0.1, 1.0, 0.0),
    (0.1, 3.0, 0.1, 2.0, 0.0),
    (0.35, 0.5, 0.1, 1.0, 0.125),
])
def test_seller_utility_values(price, amount, eta, b, expected):
    assert seller_utility(price, amount, eta, b) == pytest.approx(expected)


# ---- response coefficients ----

def test_aux_coefficients_single_provider_has_no_cross_term():
    coeff = aux_coefficients(unit_problem(), [0.0], 0)
    assert coeff.w == 0.0
    assert coeff.u == pytest.approx(0.5)
    assert coeff.v == pytest.approx(0.5)


def test_aux_coefficients_idle_others_contribute_nothing():
    p = PricingProblem(1.0, 1.0, 1.0, rates=[1.0, 1.0, 1.0], caps=[5.0] * 3,
                       cost_coeffs=[0.1] * 3, tradeoff_exps=[1.0] * 3)
    coeff = aux_coefficients(p, [0.7, 0.0, 0.0], 0)
    assert coeff.w == 0.0


def test_aux_coefficients_cross_term_excludes_own_amount():
    p = PricingProblem(1.0, 1.0, 1.0, rates=[1.0, 2.0], caps=[5.0, 5.0],
                       cost_coeffs=[0.1, 0.1], tradeoff_exps=[1.0, 1.0])
    c0 = aux_coefficients(p, [0.4, 0.6], 0)
    manual = 1.0 * 2.0 * 0.6 / (1.0 * 1.0 * 0.6 + 1.0 * 1.0 * 2.0)
    assert c0.w == pytest.approx(manual)
    # clearing the own amount must not move w
    assert aux_coefficients(p, [0.0, 0.6], 0).w == pytest.approx(c0.w)


def test_aux_coefficients_nonnegative():
    rng = np.random.default_rng(1)
    for _ in range(50):
        k = rng.integers(1, 6)
        p = random_problem(rng, k, zero_rate_prob=0.2)
        amounts = rng.uniform(0.0, 1.0, k) * p.caps
        for j in range(k):
            c = aux_coefficients(p, amounts, j)
            assert c.u >= 0.0 and c.v >= 0.0 and c.w >= 0.0


# ---- buyer gradient ----

def test_gradient_zero_at_unit_instance_optimum():
    assert buyer_gradient(unit_problem(), [0.5], [0.25], 0) == pytest.approx(
        0.0, abs=1e-12)


def test_gradient_negative_under_expensive_price():
    assert buyer_gradient(unit_problem(), [0.0], [50.0], 0) < 0.0


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(50):
        k = rng.integers(1, 6)
        p = random_problem(rng, k)
        amounts = rng.uniform(0.15, 0.85, k) * p.caps
        prices = rng.uniform(0.02, 1.0, k)
        for j in range(k):
            h = 1e-6 * max(1.0, amounts[j])
            up, dn = amounts.copy(), amounts.copy()
            up[j] += h
            dn[j] -= h
            fd = (buyer_utility(p, up, prices) - buyer_utility(p, dn, prices)) / (2 * h)
            analytic = buyer_gradient(p, amounts, prices, j)
            assert abs(analytic - fd) / max(abs(analytic), prices[j]) < 1e-5


def test_utility_concave_along_each_amount():
    rng = np.random.default_rng(3)
    for _ in range(50):
        k = rng.integers(1, 6)
        p = random_problem(rng, k)
        amounts = rng.uniform(0.15, 0.85, k) * p.caps
        prices = rng.uniform(0.02, 1.0, k)
        for j in range(k):
            h = 0.01 * max(1.0, amounts[j])
            up, dn = amounts.copy(), amounts.copy()
            up[j] += h
            dn[j] -= h
            second = (buyer_utility(p, up, prices) - 2 * buyer_utility(p, amounts, prices)
                      + buyer_utility(p, dn, prices))
            assert second <= 1e-8


# ---- buyer best response ----

def test_best_response_unit_instance():
    got = buyer_best_response(unit_problem(), [0.25])
    assert got[0] == pytest.approx(0.5, abs=1e-9)
    # grid oracle over [0, cap]
    grid = np.linspace(0.0, 10.0, 10_000)
    utilities = [buyer_utility(unit_problem(), [c], [0.25]) for c in grid]
    assert abs(grid[int(np.argmax(utilities))] - 0.5) < 1e-3


def test_best_response_vanishes_at_huge_price():
    assert buyer_best_response(unit_problem(), [1e12])[0] == 0.0


def test_best_response_zero_cap():
    p = PricingProblem(1.0, 1.0, 1.0, rates=[1.0], caps=[0.0],
                       cost_coeffs=[0.1], tradeoff_exps=[1.0])
    assert buyer_best_response(p, [0.25])[0] == 0.0


def test_best_response_matches_grid_argmax():
    rng = np.random.default_rng(4)
    checked = 0
    while checked < 20:
        k = rng.integers(1, 4)
        p = random_problem(rng, k)
        prices = rng.uniform(0.02, 1.0, k)
        want, cells = grid_best_response(p, prices)
        if not grid_resolves_instance(p, prices, want, cells):
            continue
        got = buyer_best_response(p, prices)
        assert (np.abs(got - want) <= cells + 1e-12).all()
        checked += 1


def test_best_response_warm_start_agrees_with_cold():
    rng = np.random.default_rng(5)
    p = random_problem(rng, 4)
    prices = rng.uniform(0.05, 0.5, 4)
    cold = buyer_best_response(p, prices)
    warm = buyer_best_response(p, prices, start=p.caps)
    np.testing.assert_allclose(cold, warm, atol=1e-7)


def test_best_response_requires_positive_prices():
    with pytest.raises(ValueError, match="positive"):
        buyer_best_response(unit_problem(), [0.0])


def test_best_response_sweep_budget_error_carries_iterate():
    p = PricingProblem(100.0, 10.0, 5.0, rates=[8.0, 9.0], caps=[20.0, 20.0],
                       cost_coeffs=[0.05, 0.05], tradeoff_exps=[1.0, 1.0])
    with pytest.raises(BestResponseError) as info:
        buyer_best_response(p, [0.1, 0.1], max_sweeps=1)
    assert info.value.residual > 1e-9
    assert info.value.amounts.shape == (2,)


# ---- seller side ----

@pytest.mark.parametrize("u,price,expected", [
    (0.5, 0.25, -2.0),
    (0.0, 0.7, 0.0),
    (1.0, 1.0, -0.5),
])
def test_price_derivative_values(u, price, expected):
    assert price_derivative(u, price) == pytest.approx(expected)


def test_price_derivative_matches_finite_difference_on_response():
    u, v, price = 0.5, 0.5, 0.25
    h = 1e-7
    fd = ((u / math.sqrt(price + h) - v) - (u / math.sqrt(price - h) - v)) / (2 * h)
    assert price_derivative(u, price) == pytest.approx(fd, rel=1e-6)


def test_seller_price_update_example():
    assert seller_price_update(0.5, 0.25, 0.1, 1.0, 0.5) == pytest.approx(0.35)


def test_seller_price_update_keeps_price_when_unsold():
    assert seller_price_update(0.0, 0.4, 0.1, 1.0, 0.5) == 0.4


def test_seller_price_update_approaches_cost_for_tiny_sales():
    got = seller_price_update(1e-12, 0.25, 0.1, 1.0, 0.5)
    assert got == pytest.approx(0.1, abs=1e-9)


def test_seller_price_update_never_undercuts_cost():
    rng = np.random.default_rng(6)
    for _ in range(100):
        eta = rng.uniform(0.01, 1.0)
        got = seller_price_update(rng.uniform(0, 5), rng.uniform(0.01, 2.0),
                                  eta, rng.uniform(1.0, 3.0), rng.uniform(0.1, 5.0))
        assert got >= eta


def test_seller_price_update_rejects_contradiction():
    with pytest.raises(RuntimeError, match="zero response"):
        seller_price_update(1.0, 0.25, 0.1, 1.0, 0.0)


# ---- the fixed-point solver ----

def test_solver_unit_instance_stationary():
    p = unit_problem()
    eq = solve_equilibrium(p, price_init=0.1)
    assert eq.converged
    assert 0.0 < eq.amounts[0] < p.caps[0]
    grad = buyer_gradient(p, eq.amounts, eq.prices, 0)
    assert abs(grad) <= 1e-6 * eq.prices[0]
    coeff = aux_coefficients(p, eq.amounts, 0)
    res = eq.amounts[0] + 1.0 * price_derivative(coeff.u, eq.prices[0]) * (
        eq.prices[0] - 0.1)
    assert abs(res) <= 1e-6 * eq.amounts[0]


def test_solver_no_trade_when_own_capacity_dwarfs_task():
    # tiny task, large own capacity: the response is zero at the initial price
    p = PricingProblem(1.0, 1.0, 10.0, rates=[1.0, 2.0], caps=[5.0, 5.0],
                       cost_coeffs=[0.05, 0.05], tradeoff_exps=[1.0, 1.0])
    eq = solve_equilibrium(p, price_init=0.1)
    assert eq.converged
    assert eq.iterations_used <= 2
    assert (eq.amounts == 0.0).all()
    assert eq.split.beta0 == 1.0
    np.testing.assert_allclose(eq.prices, 0.1)


def test_solver_five_provider_instance_converges_quickly():
    rng = np.random.default_rng(7)
    p = PricingProblem(100.0, 75.0, 10.0,
                       rates=rng.uniform(2.0, 12.0, 5),
                       caps=rng.uniform(5.0, 15.0, 5),
                       cost_coeffs=np.full(5, 0.05),
                       tradeoff_exps=np.ones(5))
    eq = solve_equilibrium(p, price_init=0.1, tol=1e-4)
    assert eq.converged and eq.iterations_used <= 50
    assert (eq.prices > 0.05).all()
    assert ((eq.amounts >= 0) & (eq.amounts <= p.caps)).all()


def test_solver_trace_bookkeeping():
    p = unit_problem()
    eq = solve_equilibrium(p, price_init=0.1)
    assert eq.trace[0].iteration == 0
    assert eq.trace[0].amounts == (0.0,)
    assert eq.trace[-1].iteration == len(eq.trace) - 1
    assert eq.iterations_used <= len(eq.trace) - 1
    for row in eq.trace:
        assert all(price > 0 for price in row.prices)
        assert all(0.0 <= a <= p.caps[i] for i, a in enumerate(row.amounts))
    # sold providers never get priced below cost after the first update
    for row in eq.trace[1:]:
        for j, amount in enumerate(row.amounts):
            if amount > 0:
                assert row.prices[j] >= p.cost_coeffs[j] - 1e-15


def test_solver_deterministic():
    rng = np.random.default_rng(8)
    p = random_problem(rng, 4)
    a = solve_equilibrium(p, price_init=0.1)
    b = solve_equilibrium(p, price_init=0.1)
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.prices, b.prices)


def test_solver_nonconvergence_reports_last_iterate():
    p = unit_problem()
    eq = solve_equilibrium(p, price_init=0.1, max_iter=1)
    assert not eq.converged
    assert eq.iterations_used == 1
    assert eq.residual > 1e-4
    assert np.isfinite(eq.prices).all()


def test_solver_rejects_bad_inputs():
    with pytest.raises(ValueError):
        solve_equilibrium(unit_problem(), price_init=0.0)
    with pytest.raises(ValueError):
        solve_equilibrium(unit_problem(), price_init=0.1, tol=-1.0)
    with pytest.raises(ValueError):
        solve_equilibrium(unit_problem(), price_init=0.1, max_iter=0)


def test_solver_vector_price_init():
    p = PricingProblem(1.0, 1.0, 1.0, rates=[1.0, 1.0], caps=[10.0, 10.0],
                       cost_coeffs=[0.1, 0.1], tradeoff_exps=[1.0, 1.0])
    eq = solve_equilibrium(p, price_init=[0.1, 0.3])
    assert eq.converged
    assert eq.prices[0] == pytest.approx(eq.prices[1], rel=1e-6)


def test_solver_handles_zero_data_volume():
    # pure compute task: transmission is free, so the buyer rides the cap
    p = PricingProblem(100.0, 0.0, 10.0, rates=[5.0, 0.0], caps=[8.0, 8.0],
                       cost_coeffs=[0.05, 0.05], tradeoff_exps=[1.0, 1.0])
    eq = solve_equilibrium(p, price_init=0.1)
    assert eq.converged
    assert eq.amounts[1] == 0.0  # no link, no trade
    assert eq.amounts[0] == 8.0
    # at an active upper bound the buyer still wants more
    assert buyer_gradient(p, eq.amounts, eq.prices, 0) > 0.0


def test_solver_stationary_with_quadratic_profit_exponent():
    p = unit_problem(eta=0.1, b=2.0)
    eq = solve_equilibrium(p, price_init=0.1)
    assert eq.converged
    lam, c = eq.prices[0], eq.amounts[0]
    assert 0.0 < c < p.caps[0]
    coeff = aux_coefficients(p, eq.amounts, 0)
    # profit against the anticipated response is flat at the fixed point
    h = 1e-6 * lam
    up = (lam + h - 0.1) * max(coeff.u / math.sqrt(lam + h) - coeff.v, 0.0) ** 2
    dn = (lam - h - 0.1) * max(coeff.u / math.sqrt(lam - h) - coeff.v, 0.0) ** 2
    assert abs(up - dn) / (2 * h) < 1e-5


def test_trace_csv_layout(tmp_path):
    p = PricingProblem(100.0, 75.0, 10.0, rates=[5.0, 7.0], caps=[10.0, 10.0],
                       cost_coeffs=[0.05, 0.05], tradeoff_exps=[1.0, 1.0])
    eq = solve_equilibrium(p, price_init=0.1, tol=1e-4)
    path = write_trace_csv(eq, tmp_path / "trace.csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "price_1", "price_2", "amount_1", "amount_2",
                       "beta_0", "buyer_utility", "seller_utility_1",
                       "seller_utility_2"]
    assert len(rows) - 1 == len(eq.trace)
    # stopping rule restated: the last two recorded iterations differ < tol
    last, prev = rows[-1], rows[-2]
    for col in range(1, 5):
        assert abs(float(last[col]) - float(prev[col])) < 1e-4


def test_trace_csv_single_provider_has_single_price_column(tmp_path):
    eq = solve_equilibrium(unit_problem(), price_init=0.1)
    path = write_trace_csv(eq, tmp_path / "trace.csv")
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    assert header.count("price_1") == 1 and "price_2" not in header
