"""Min-cost flow against exhaustive enumeration."""

import numpy as np
import pytest

from fleetsim.flow import FlowProblem, min_cost_flow

from oracles import brute_force_flow


def cost_matrix(travel):
    return 1.0 / np.asarray(travel, dtype=float)


def test_single_arc_forced_routing():
    problem = FlowProblem(balance=np.array([3, -2]), costs=cost_matrix([[1, 2], [2, 1]]))
    flows = min_cost_flow(problem)
    assert flows[0, 1] == 2
    assert flows.sum() == 2


def test_two_sources_two_sinks_prefers_fast_arcs():
    # sources 0 and 2, sinks 1 and 3; arc (0,1) faster than (2,1) and
    # (2,3) faster than (0,3)
    travel = np.array(
        [
            [9.0, 8.0, 2.0, 1.0],
            [1.0, 9.0, 1.0, 1.0],
            [1.0, 2.0, 9.0, 6.0],
            [1.0, 1.0, 1.0, 9.0],
        ]
    )
    balance = np.array([3, -1, 3, -2])
    problem = FlowProblem(balance=balance, costs=cost_matrix(travel))
    flows = min_cost_flow(problem)
    assert flows[0, 1] == 1
    assert flows[2, 3] == 2
    assert flows.sum() == 3
    best_cost, _ = brute_force_flow(problem.costs, balance, problem.out_caps)
    assert float((flows * problem.costs).sum()) == pytest.approx(best_cost, abs=1e-12)


def test_equal_cost_arcs_still_meet_demand():
    travel = np.full((3, 3), 2.0)
    problem = FlowProblem(balance=np.array([5, -2, -2]), costs=cost_matrix(travel))
    flows = min_cost_flow(problem)
    assert flows.sum() == 4
    assert flows[0, 1] == 2 and flows[0, 2] == 2


def test_demand_exceeding_supply_raises():
    problem = FlowProblem(balance=np.array([1, -3]), costs=cost_matrix([[1, 1], [1, 1]]))
    with pytest.raises(ValueError):
        min_cost_flow(problem)


def test_relay_through_pool_beats_direct_when_triangle_fails():
    # direct (0,2) is slow; region 1 has idle vehicles to relay through
    travel = np.array(
        [
            [9.0, 4.0, 1.0],
            [1.0, 9.0, 4.0],
            [1.0, 1.0, 9.0],
        ]
    )
    balance = np.array([2, 0, -2])
    relay = FlowProblem(
        balance=balance, costs=cost_matrix(travel), out_caps=np.array([2, 2, 0])
    )
    flows = min_cost_flow(relay)
    # 1/4 + 1/4 = 0.5 per vehicle via the relay vs 1.0 direct
    assert flows[0, 1] == 2 and flows[1, 2] == 2 and flows[0, 2] == 0
    direct = FlowProblem(balance=balance, costs=cost_matrix(travel))
    assert min_cost_flow(direct)[0, 2] == 2


def test_no_flow_on_diagonal_and_integrality():
    gen = np.random.default_rng(5)
    for _ in range(50):
        n = int(gen.integers(2, 5))
        travel = gen.uniform(0.5, 5.0, size=(n, n))
        idle = gen.integers(0, 4, size=n)
        surplus = gen.integers(-3, 4, size=n)
        demand = -surplus.clip(max=0).sum()
        supply = np.minimum(surplus, idle).clip(min=0).sum()
        if demand == 0 or supply < demand:
            continue
        problem = FlowProblem(
            balance=np.minimum(surplus, idle),
            costs=cost_matrix(travel),
            out_caps=idle,
        )
        flows = min_cost_flow(problem)
        assert flows.dtype == np.int64
        assert np.all(np.diag(flows) == 0)
        assert np.all(flows.sum(axis=1) <= idle)


def test_matches_brute_force_on_random_instances():
    gen = np.random.default_rng(11)
    tested = 0
    while tested < 60:
        n = int(gen.integers(2, 5))
        travel = gen.uniform(0.4, 4.0, size=(n, n))
        balance = gen.integers(-2, 3, size=n)
        caps = np.maximum(balance, 0) + gen.integers(0, 2, size=n)
        demand = -balance.clip(max=0).sum()
        if demand == 0 or demand > 6:
            continue
        problem = FlowProblem(balance=balance, costs=cost_matrix(travel), out_caps=caps)
        oracle = brute_force_flow(problem.costs, balance, caps)
        if oracle is None:
            with pytest.raises(ValueError):
                min_cost_flow(problem)
            continue
        tested += 1
        flows = min_cost_flow(problem)
        assert float((flows * problem.costs).sum()) == pytest.approx(oracle[0], abs=1e-9)
        received = flows.sum(axis=0) - flows.sum(axis=1)
        for j in range(n):
            if balance[j] < 0:
                assert received[j] == -balance[j]
