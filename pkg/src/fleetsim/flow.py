"""Integer minimum-cost flow for rebalancing dispatch.

The dispatch problem routes empty vehicles from regions with surplus to
regions with deficit at minimum total expected driving time.  It is solved
as a min-cost flow on a node-split network: each region has a balance node
(net surplus/deficit) and a pool node (gross dispatches are limited by the
idle vehicles physically present), so relay dispatches through intermediate
regions are representable without ever exceeding any region's idle count.

Successive shortest augmenting paths with node potentials deliver integral
flows directly; no LP rounding is involved.  The kernel is numba-compiled
because the event-driven controller solves one of these inside the
simulation hot loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["FlowProblem", "min_cost_flow", "mcf_kernel"]

_BIG = np.int64(1) << 40


@dataclass
class FlowProblem:
    """A dispatch-shaped flow instance.

    ``balance[i]`` is the net number of vehicles region ``i`` may shed
    (positive, a source) or must receive (negative, a sink).  ``costs[i, j]``
    is the per-vehicle cost of the arc (expected travel time); the diagonal
    is ignored.  ``out_caps[i]`` limits the gross number of dispatches out of
    region ``i``; when omitted it defaults to the positive part of the
    balance, which forbids relaying through intermediate regions.
    """

    balance: np.ndarray
    costs: np.ndarray
    out_caps: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.balance = np.asarray(self.balance, dtype=np.int64)
        self.costs = np.asarray(self.costs, dtype=float)
        n = self.balance.shape[0]
        if self.costs.shape != (n, n):
            raise ValueError("costs must be n x n")
        off_diag = self.costs[~np.eye(n, dtype=bool)]
        if n > 1 and np.any(off_diag <= 0):
            raise ValueError("arc costs must be strictly positive")
        if self.out_caps is None:
            self.out_caps = np.maximum(self.balance, 0)
        else:
            self.out_caps = np.asarray(self.out_caps, dtype=np.int64)
            if self.out_caps.shape != (n,):
                raise ValueError("out_caps must have one entry per node")
            if np.any(self.out_caps < 0):
                raise ValueError("out_caps must be nonnegative")

    @property
    def supply_total(self) -> int:
        return int(np.maximum(self.balance, 0).sum())

    @property
    def demand_total(self) -> int:
        return int(np.maximum(-self.balance, 0).sum())


@njit(cache=True, nogil=True)
def mcf_kernel(costs, balance, out_caps):  # pragma: no cover - exercised via wrapper
    """Successive-shortest-path min-cost flow on the split-node network.

    Returns ``(flow_matrix, shipped)``; ``shipped`` equals the total demand
    whenever the instance is feasible.  Node layout: balance nodes 0..n-1,
    pool nodes n..2n-1, super source 2n, super sink 2n+1.  Arc insertion
    order is fixed so equal-cost optima resolve deterministically (lowest
    origin/destination preferred).
    """
    n = balance.shape[0]
    n_nodes = 2 * n + 2
    src = 2 * n
    snk = 2 * n + 1
    max_edges = 2 * (3 * n + n * n)
    e_to = np.empty(max_edges, dtype=np.int64)
    e_cap = np.empty(max_edges, dtype=np.int64)
    e_cost = np.empty(max_edges, dtype=np.float64)
    e_next = np.empty(max_edges, dtype=np.int64)
    head = np.full(n_nodes, -1, dtype=np.int64)
    n_edges = 0

    demand_total = np.int64(0)
    for i in range(n):
        if balance[i] < 0:
            demand_total += -balance[i]

    # super source -> balance nodes (supply caps)
    for i in range(n):
        cap = balance[i] if balance[i] > 0 else 0
        # forward
        e_to[n_edges] = i
        e_cap[n_edges] = cap
        e_cost[n_edges] = 0.0
        e_next[n_edges] = head[src]
        head[src] = n_edges
        n_edges += 1
        # reverse
        e_to[n_edges] = src
        e_cap[n_edges] = 0
        e_cost[n_edges] = 0.0
        e_next[n_edges] = head[i]
        head[i] = n_edges
        n_edges += 1
    # balance nodes -> super sink (demand caps)
    for i in range(n):
        cap = -balance[i] if balance[i] < 0 else 0
        e_to[n_edges] = snk
        e_cap[n_edges] = cap
        e_cost[n_edges] = 0.0
        e_next[n_edges] = head[i]
        head[i] = n_edges
        n_edges += 1
        e_to[n_edges] = i
        e_cap[n_edges] = 0
        e_cost[n_edges] = 0.0
        e_next[n_edges] = head[snk]
        head[snk] = n_edges
        n_edges += 1
    # balance node -> pool node (gross outflow cap)
    pool_edge = np.empty(n, dtype=np.int64)
    for i in range(n):
        pool_edge[i] = n_edges
        e_to[n_edges] = n + i
        e_cap[n_edges] = out_caps[i]
        e_cost[n_edges] = 0.0
        e_next[n_edges] = head[i]
        head[i] = n_edges
        n_edges += 1
        e_to[n_edges] = i
        e_cap[n_edges] = 0
        e_cost[n_edges] = 0.0
        e_next[n_edges] = head[n + i]
        head[n + i] = n_edges
        n_edges += 1
    # pool node -> other balance nodes (the actual dispatch arcs); inserted in
    # reverse row-major order so the LIFO adjacency lists scan low (i, j) first
    arc_edge = np.full((n, n), -1, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        for j in range(n - 1, -1, -1):
            if i == j:
                continue
            arc_edge[i, j] = n_edges
            e_to[n_edges] = j
            e_cap[n_edges] = _BIG
            e_cost[n_edges] = costs[i, j]
            e_next[n_edges] = head[n + i]
            head[n + i] = n_edges
            n_edges += 1
            e_to[n_edges] = n + i
            e_cap[n_edges] = 0
            e_cost[n_edges] = -costs[i, j]
            e_next[n_edges] = head[j]
            head[j] = n_edges
            n_edges += 1

    potential = np.zeros(n_nodes, dtype=np.float64)
    dist = np.empty(n_nodes, dtype=np.float64)
    visited = np.empty(n_nodes, dtype=np.bool_)
    pred_edge = np.empty(n_nodes, dtype=np.int64)
    shipped = np.int64(0)
    inf = np.inf

    while shipped < demand_total:
        for v in range(n_nodes):
            dist[v] = inf
            visited[v] = False
            pred_edge[v] = -1
        dist[src] = 0.0
        # dense Dijkstra with reduced costs
        for _ in range(n_nodes):
            u = -1
            best = inf
            for v in range(n_nodes):
                if not visited[v] and dist[v] < best:
                    best = dist[v]
                    u = v
            if u < 0:
                break
            visited[u] = True
            if u == snk:
                continue
            e = head[u]
            while e >= 0:
                if e_cap[e] > 0:
                    v = e_to[e]
                    nd = dist[u] + e_cost[e] + potential[u] - potential[v]
                    if nd < dist[v] - 1e-15:
                        dist[v] = nd
                        pred_edge[v] = e
                e = e_next[e]
        if dist[snk] == inf:
            break
        for v in range(n_nodes):
            if dist[v] < inf:
                potential[v] += dist[v]
        # bottleneck along the augmenting path
        push = _BIG
        v = snk
        while v != src:
            e = pred_edge[v]
            if e_cap[e] < push:
                push = e_cap[e]
            v = e_to[e ^ 1]
        v = snk
        while v != src:
            e = pred_edge[v]
            e_cap[e] -= push
            e_cap[e ^ 1] += push
            v = e_to[e ^ 1]
        shipped += push

    flows = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            e = arc_edge[i, j]
            if e >= 0:
                flows[i, j] = e_cap[e ^ 1]
    return flows, shipped


def min_cost_flow(problem: FlowProblem) -> np.ndarray:
    """Solve the flow problem; returns the integer dispatch matrix.

    Raises if demand exceeds available supply (the caller is responsible for
    gating on the supply/demand inequality before dispatching).
    """
    if problem.demand_total > problem.supply_total:
        raise ValueError("total demand exceeds total supply")
    flows, shipped = mcf_kernel(problem.costs, problem.balance, problem.out_caps)
    if shipped < problem.demand_total:
        raise ValueError("flow instance infeasible despite supply >= demand")
    return flows
