import itertools

import numpy as np
import pytest

from cfnlearn import (CostFunctionNetwork, SolverConfig, solve,
                      enumerate_solutions, brute_force, hinge_argmin, sudoku)
from .test_network import four_var_example, random_net


def random_hard_net(rng, n_max=8, d_max=3):
    n = int(rng.integers(2, n_max + 1))
    doms = rng.integers(2, d_max + 1, size=n)
    net = CostFunctionNetwork(doms)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.7:
                m = rng.uniform(0, 5, (doms[i], doms[j]))
                m[rng.random((doms[i], doms[j])) < 0.1] = net.top
                net.add_pair(i, j, m)
        if rng.random() < 0.4:
            net.add_unary(i, rng.uniform(0, 5, doms[i]))
    return net


def test_empty_network_lexicographic():
    net = CostFunctionNetwork([2, 3, 2])
    res = solve(net)
    assert res.best == (0, 0, 0)
    assert res.best_cost == 0.0
    assert res.proven_optimal


def test_solve_matches_brute_force_on_random_nets():
    rng = np.random.default_rng(10)
    for _ in range(100):
        net = random_hard_net(rng)
        bf = brute_force(net)
        res = solve(net)
        assert res.proven_optimal
        assert np.isclose(res.best_cost, bf.best_cost)
        if res.best_cost < net.top:
            assert np.isclose(net.evaluate(res.best), res.best_cost)


def test_solve_handles_signed_costs():
    rng = np.random.default_rng(11)
    for _ in range(30):
        net = random_net(rng, n=6, d=3, signed=True)
        assert np.isclose(solve(net).best_cost, brute_force(net).best_cost)


def test_solve_upper_bounds_every_assignment():
    rng = np.random.default_rng(12)
    net = random_hard_net(rng)
    best = solve(net).best_cost
    for _ in range(50):
        y = tuple(rng.integers(d) for d in net.domains)
        assert best <= net.evaluate(y) + 1e-9


def test_solve_invariant_under_zero_matrices():
    rng = np.random.default_rng(13)
    net = random_hard_net(rng, n_max=6)
    padded = net.copy()
    for i in range(net.n):
        for j in range(i + 1, net.n):
            if (i, j) not in padded.pairs:
                padded.add_pair(i, j, np.zeros((net.domains[i], net.domains[j])))
    a, b = solve(net), solve(padded)
    assert a.best_cost == b.best_cost


def test_solve_deterministic():
    rng = np.random.default_rng(14)
    net = random_hard_net(rng)
    a, b = solve(net), solve(net)
    assert a == b


def test_infeasible_network():
    net = CostFunctionNetwork([2, 2])
    net.add_unary(0, [net.top, net.top])
    res = solve(net)
    assert res.best_cost == net.top
    assert res.best is None
    bf = brute_force(net)
    assert bf.best_cost == net.top


def test_node_limit_reported():
    rng = np.random.default_rng(15)
    net = random_hard_net(rng, n_max=8)
    res = solve(net, SolverConfig(node_limit=3))
    assert not res.proven_optimal


def test_enumerate_single_free_variable():
    net = CostFunctionNetwork([2])
    res = enumerate_solutions(net, SolverConfig(enumeration_bound=0.0,
                                                max_solutions=10))
    assert [y for y, _ in res.solutions] == [(0,), (1,)]
    assert not res.truncated


def test_enumerate_four_var_example():
    net = four_var_example()
    res = enumerate_solutions(net, SolverConfig(enumeration_bound=0.0,
                                                max_solutions=100))
    expected = sorted(y for y in itertools.product(range(2), repeat=4)
                      if net.evaluate(y) == 0.0)
    assert [y for y, _ in res.solutions] == expected


def test_enumerate_matches_brute_force_sets():
    rng = np.random.default_rng(16)
    for _ in range(50):
        net = random_hard_net(rng, n_max=6)
        bf = brute_force(net)
        if bf.best_cost >= net.top:
            continue
        bound = bf.best_cost + 2.0
        res = enumerate_solutions(net, SolverConfig(enumeration_bound=bound,
                                                    max_solutions=10 ** 6))
        ref = sorted(y for y in itertools.product(
            *(range(d) for d in net.domains)) if net.evaluate(y) <= bound)
        assert [y for y, _ in res.solutions] == ref
        assert bf.best in {y for y, _ in res.solutions}


def test_enumerate_truncation_flag():
    net = CostFunctionNetwork([2, 2, 2])
    res = enumerate_solutions(net, SolverConfig(enumeration_bound=0.0,
                                                max_solutions=3))
    assert res.truncated
    assert len(res.solutions) == 3


def test_enumerate_rejects_bound_at_top():
    net = CostFunctionNetwork([2])
    with pytest.raises(ValueError):
        enumerate_solutions(net, SolverConfig(enumeration_bound=net.top))


def test_brute_force_refuses_large_spaces():
    net = CostFunctionNetwork([9] * 9)
    with pytest.raises(ValueError):
        brute_force(net)


def test_hinge_argmin_zero_margin_is_solve():
    rng = np.random.default_rng(17)
    net = random_hard_net(rng)
    y = tuple(rng.integers(d) for d in net.domains)
    a = hinge_argmin(net, y, 0.0)
    b = solve(net)
    assert a.best == b.best and a.best_cost == b.best_cost


def test_hinge_argmin_on_zero_network_flees_y():
    net = CostFunctionNetwork([2, 3, 2])
    y = (0, 0, 0)
    res = hinge_argmin(net, y, 1.0)
    assert all(v != yi for v, yi in zip(res.best, y))


def test_hinge_argmin_matches_brute_force_augmentation():
    rng = np.random.default_rng(18)
    for _ in range(20):
        net = random_net(rng, n=6, d=3)
        y = tuple(rng.integers(d) for d in net.domains)
        res = hinge_argmin(net, y, 0.5)
        best = min(net.evaluate(t) - 0.5 * sum(a != b for a, b in zip(t, y))
                   for t in itertools.product(*(range(d) for d in net.domains)))
        assert np.isclose(res.best_cost, best)


def test_hinge_argmin_rejects_negative_margin():
    net = CostFunctionNetwork([2, 2])
    with pytest.raises(ValueError):
        hinge_argmin(net, (0, 0), -1.0)


# A classic 17-hint puzzle; its unique solution is re-derived below by
# enumeration, so the frozen grid is checked end to end.
PUZZLE_17 = ("000000010400000000020000000000050407"
             "008000300001090000300400200050100000000806000")
SOLUTION_17 = ("693784512487512936125963874932651487"
               "568247391741398625319475268856129743274836159")


def test_9x9_rules_with_17_hints_has_unique_known_solution():
    hints = {i: int(ch) - 1 for i, ch in enumerate(PUZZLE_17) if ch != "0"}
    assert len(hints) == 17
    net = sudoku.true_rules(9).condition(hints)
    cfg = SolverConfig(enumeration_bound=0.0, max_solutions=2,
                       variable_order="min-domain-then-index")
    res = enumerate_solutions(net, cfg)
    assert not res.truncated and len(res.solutions) == 1
    found = "".join(str(v + 1) for v in res.solutions[0][0])
    assert found == SOLUTION_17
    best = solve(net, cfg)
    assert best.best == res.solutions[0][0]


def test_variable_orders_agree():
    rng = np.random.default_rng(19)
    dyn = SolverConfig(variable_order="min-domain-then-index")
    for _ in range(30):
        net = random_hard_net(rng)
        assert np.isclose(solve(net).best_cost, solve(net, dyn).best_cost)
    for _ in range(10):
        net = random_hard_net(rng, n_max=6)
        bf = brute_force(net)
        if bf.best_cost >= net.top:
            continue
        a = enumerate_solutions(net, SolverConfig(
            enumeration_bound=bf.best_cost + 1.0, max_solutions=10 ** 6))
        b = enumerate_solutions(net, SolverConfig(
            enumeration_bound=bf.best_cost + 1.0, max_solutions=10 ** 6,
            variable_order="min-domain-then-index"))
        # costs are summed in different orders, so compare loosely
        assert [y for y, _ in a.solutions] == [y for y, _ in b.solutions]
        assert np.allclose([c for _, c in a.solutions],
                           [c for _, c in b.solutions])
