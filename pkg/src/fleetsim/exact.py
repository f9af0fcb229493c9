"""Exact and analytic references for small systems and fluid abstractions.

These computations serve as ground truth for the simulator and controllers:

* state-space cardinality of the general system (it grows so fast that
  dynamic programming is hopeless beyond toy sizes - that is the point);
* the two-region single-vehicle chain, whose stationary distribution,
  closed-form optimal dispatch-rate policy, and average-cost dynamic
  program are all tractable;
* a fluid lower bound on the achievable objective for any fleet size.

Region indices are 0-based throughout; the two-region helpers take 2x2
rate matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, inf

import numpy as np

from .lp import LinearProgram, solve_lp
from .model import SystemConfig

__all__ = [
    "state_space_size",
    "states_with_min_controls",
    "TWO_REGION_STATES",
    "ctmc_generator",
    "ctmc_steady_state",
    "chain_objective",
    "CostRatioCoefficients",
    "analytic_coefficients",
    "RatePolicyResult",
    "optimal_rate_policy",
    "SmallSystemSolution",
    "dp_small_system",
    "LowerBoundResult",
    "lower_bound",
]


def state_space_size(n_regions: int, fleet_size: int) -> int:
    """Number of reachable states: vehicles distributed over idle queues
    and the two en-route matrices, i.e. weak compositions of the fleet into
    2*n^2 cells (idle counts occupy the diagonal of the full-trip matrix's
    companion; the count is the standard stars-and-bars formula)."""
    if n_regions < 1 or fleet_size < 1:
        raise ValueError("need at least one region and one vehicle")
    cells = 2 * n_regions * n_regions - 1
    return comb(fleet_size + cells, cells)


def states_with_min_controls(n_regions: int, fleet_size: int) -> int:
    """Number of states offering at least n_regions - 1 control choices."""
    if n_regions < 1 or fleet_size < 1:
        raise ValueError("need at least one region and one vehicle")
    cells = 2 * n_regions * n_regions - 1
    reduced = cells - n_regions
    return comb(fleet_size + cells, cells) - comb(fleet_size + reduced, reduced)


# Two-region, single-vehicle chain: state order used everywhere below.
TWO_REGION_STATES = (
    "idle_1",
    "idle_2",
    "full_1_1",
    "full_1_2",
    "full_2_1",
    "full_2_2",
    "empty_1_2",
    "empty_2_1",
)
_IDLE1, _IDLE2, _F11, _F12, _F21, _F22, _E12, _E21 = range(8)


def _check_two_region(lam: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if lam.shape != (2, 2) or mu.shape != (2, 2):
        raise ValueError("two-region helpers take 2x2 rate matrices")
    if np.any(lam <= 0) or np.any(mu <= 0):
        raise ValueError("rates must be strictly positive (zero rates make the chain reducible)")
    return lam, mu


def ctmc_generator(lam: np.ndarray, mu: np.ndarray, send12: float = 0.0, send21: float = 0.0) -> np.ndarray:
    """Generator of the 8-state chain with empty-dispatch rates.

    ``send12`` is the rate at which an idle vehicle in region 1 is sent
    empty to region 2, and symmetrically for ``send21``.
    """
    lam, mu = _check_two_region(lam, mu)
    if send12 < 0 or send21 < 0:
        raise ValueError("dispatch rates must be nonnegative")
    q = np.zeros((8, 8))
    q[_IDLE1, _F11] = lam[0, 0]
    q[_IDLE1, _F12] = lam[0, 1]
    q[_IDLE1, _E12] = send12
    q[_IDLE2, _F21] = lam[1, 0]
    q[_IDLE2, _F22] = lam[1, 1]
    q[_IDLE2, _E21] = send21
    q[_F11, _IDLE1] = mu[0, 0]
    q[_F12, _IDLE2] = mu[0, 1]
    q[_F21, _IDLE1] = mu[1, 0]
    q[_F22, _IDLE2] = mu[1, 1]
    q[_E12, _IDLE2] = mu[0, 1]
    q[_E21, _IDLE1] = mu[1, 0]
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def ctmc_steady_state(lam: np.ndarray, mu: np.ndarray, send12: float = 0.0, send21: float = 0.0) -> np.ndarray:
    """Stationary distribution pi of the 8-state chain (pi Q = 0, sum 1)."""
    q = ctmc_generator(lam, mu, send12, send21)
    a = np.vstack([q.T, np.ones(8)])
    b = np.zeros(9)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.where(np.abs(pi) < 1e-14, 0.0, pi)
    if np.any(pi < -1e-9):
        raise RuntimeError("stationary solve produced negative probabilities")
    return np.clip(pi, 0.0, None) / pi.sum()


def chain_objective(lam: np.ndarray, mu: np.ndarray, send12: float, send21: float) -> float:
    """Rejected plus empty fraction of the chain under given dispatch rates.

    Requests from a region are lost whenever the vehicle is not idle there;
    the empty fraction is the probability of the two empty-driving states.
    The equal-weight objective is half this value; its ceiling is 2 (all
    requests lost while driving empty full-time).
    """
    lam, mu = _check_two_region(lam, mu)
    pi = ctmc_steady_state(lam, mu, send12, send21)
    lam_total = lam.sum()
    rejected = (
        (lam[0, 0] + lam[0, 1]) * (1.0 - pi[_IDLE1])
        + (lam[1, 0] + lam[1, 1]) * (1.0 - pi[_IDLE2])
    ) / lam_total
    empty = pi[_E12] + pi[_E21]
    return float(rejected + empty)


@dataclass(frozen=True)
class CostRatioCoefficients:
    """Coefficients of the chain objective as a bilinear rational function.

    With dispatch rates ``(b12, b21)`` the rejected-plus-empty fraction is
    ``(num_cross*b12*b21 + num_12*b12 + num_21*b21 + num_const) /
    (den_cross*b12*b21 + den_12*b12 + den_21*b21 + den_const)``.
    All eight coefficients are positive polynomials in the rates, and the
    cross terms satisfy ``num_cross = 2 * den_cross`` identically, which
    pins the large-rate limit of the objective at 2.
    """

    num_cross: float
    num_12: float
    num_21: float
    num_const: float
    den_cross: float
    den_12: float
    den_21: float
    den_const: float

    def value(self, b12: float, b21: float) -> float:
        num = self.num_cross * b12 * b21 + self.num_12 * b12 + self.num_21 * b21 + self.num_const
        den = self.den_cross * b12 * b21 + self.den_12 * b12 + self.den_21 * b21 + self.den_const
        return num / den

    def corner_ratios(self) -> dict[tuple[float, float], float]:
        """Objective value at the four extreme dispatch-rate corners."""
        return {
            (inf, inf): self.num_cross / self.den_cross,
            (inf, 0.0): self.num_12 / self.den_12,
            (0.0, inf): self.num_21 / self.den_21,
            (0.0, 0.0): self.num_const / self.den_const,
        }


def analytic_coefficients(lam: np.ndarray, mu: np.ndarray) -> CostRatioCoefficients:
    """Closed-form coefficients of the equal-weight chain objective."""
    lam, mu = _check_two_region(lam, mu)
    l11, l12 = lam[0, 0], lam[0, 1]
    l21, l22 = lam[1, 0], lam[1, 1]
    m11, m12 = mu[0, 0], mu[0, 1]
    m21, m22 = mu[1, 0], mu[1, 1]
    lam_sum = l11 + l12 + l21 + l22
    m4 = m11 * m12 * m21 * m22

    num_cross = 2.0 * (m11 * m12 * m22 + m11 * m21 * m22) * lam_sum
    den_cross = (m11 * m12 * m22 + m11 * m21 * m22) * lam_sum

    num_12 = (
        l21**2 * m11 * m12 * m22
        + l22**2 * m11 * m12 * m21
        + 2 * l21**2 * m11 * m21 * m22
        + l11 * l21 * m11 * m12 * m22
        + l11 * l22 * m11 * m12 * m21
        + l12 * l21 * m11 * m12 * m22
        + l12 * l22 * m11 * m12 * m21
        + 2 * l11 * l21 * m11 * m21 * m22
        + 2 * l12 * l21 * m11 * m21 * m22
        + l21 * l22 * m11 * m12 * m21
        + l21 * l22 * m11 * m12 * m22
        + 2 * l21 * l22 * m11 * m21 * m22
        + l11 * m4
        + l12 * m4
    )
    num_21 = (
        2 * l12**2 * m11 * m12 * m22
        + l11**2 * m12 * m21 * m22
        + l12**2 * m11 * m21 * m22
        + 2 * l11 * l12 * m11 * m12 * m22
        + l11 * l12 * m11 * m21 * m22
        + l11 * l12 * m12 * m21 * m22
        + 2 * l12 * l21 * m11 * m12 * m22
        + 2 * l12 * l22 * m11 * m12 * m22
        + l11 * l21 * m12 * m21 * m22
        + l12 * l21 * m11 * m21 * m22
        + l11 * l22 * m12 * m21 * m22
        + l12 * l22 * m11 * m21 * m22
        + l21 * m4
        + l22 * m4
    )
    num_const = (
        l12 * l21**2 * m11 * m12 * m22
        + l12 * l22**2 * m11 * m12 * m21
        + l12**2 * l21 * m11 * m12 * m22
        + l12**2 * l22 * m11 * m12 * m21
        + l11 * l21**2 * m12 * m21 * m22
        + l12 * l21**2 * m11 * m21 * m22
        + l11**2 * l21 * m12 * m21 * m22
        + l12**2 * l21 * m11 * m21 * m22
        + l12**2 * m4
        + l21**2 * m4
        + l11 * l12 * l21 * m11 * m12 * m22
        + l11 * l12 * l22 * m11 * m12 * m21
        + l11 * l12 * l21 * m11 * m21 * m22
        + l11 * l12 * l21 * m12 * m21 * m22
        + l12 * l21 * l22 * m11 * m12 * m21
        + l12 * l21 * l22 * m11 * m12 * m22
        + l11 * l21 * l22 * m12 * m21 * m22
        + l12 * l21 * l22 * m11 * m21 * m22
        + l11 * l12 * m4
        + l21 * l22 * m4
    )
    den_12 = lam_sum * (
        l21 * m11 * m12 * m22 + l22 * m11 * m12 * m21 + l21 * m11 * m21 * m22 + m4
    )
    den_21 = lam_sum * (
        l12 * m11 * m12 * m22 + l11 * m12 * m21 * m22 + l12 * m11 * m21 * m22 + m4
    )
    den_const = lam_sum * (
        l12 * l21 * m11 * m12 * m22
        + l12 * l22 * m11 * m12 * m21
        + l11 * l21 * m12 * m21 * m22
        + l12 * l21 * m11 * m21 * m22
        + l12 * m4
        + l21 * m4
    )
    return CostRatioCoefficients(
        num_cross=num_cross,
        num_12=num_12,
        num_21=num_21,
        num_const=num_const,
        den_cross=den_cross,
        den_12=den_12,
        den_21=den_21,
        den_const=den_const,
    )


@dataclass(frozen=True)
class RatePolicyResult:
    """Outcome of the four-corner comparison rule.

    ``policy`` is the chosen dispatch-rate pair, each entry 0 or inf.
    Exact ties are reported in ``tied`` and broken toward fewer infinite
    rates (dispatching empty with no strict gain is dominated).
    """

    policy: tuple[float, float]
    corner_values: dict[tuple[float, float], float]
    tied: tuple[tuple[float, float], ...] = ()


def optimal_rate_policy(lam: np.ndarray, mu: np.ndarray) -> RatePolicyResult:
    """Optimal extreme dispatch rates for the equal-weight chain objective.

    The objective is monotone in each dispatch rate, so the optimum sits at
    a corner of [0, inf]^2; the corner is picked by comparing the four
    coefficient ratios.  Dispatching both ways at infinite rate attains the
    objective ceiling of 2, so it never wins.
    """
    coeffs = analytic_coefficients(lam, mu)
    corners = coeffs.corner_ratios()
    best = min(corners.values())
    tied = tuple(c for c, v in corners.items() if v == best)
    # fewer infinite rates first; then prefer dispatching out of region 1
    preference = [(0.0, 0.0), (inf, 0.0), (0.0, inf), (inf, inf)]
    choice = next(c for c in preference if c in tied)
    return RatePolicyResult(policy=choice, corner_values=corners, tied=tied if len(tied) > 1 else ())


# Controllable states of the small-system DP and where dispatching leads.
_DP_CONTROLLABLE = (_F11, _F12, _F21, _F22, _E12, _E21)
_DP_COMPLETION_RATE = {
    _F11: (0, 0),
    _F12: (0, 1),
    _F21: (1, 0),
    _F22: (1, 1),
    _E12: (0, 1),
    _E21: (1, 0),
}
_DP_IDLE_TARGET = {_F11: _IDLE1, _F12: _IDLE2, _F21: _IDLE1, _F22: _IDLE2, _E12: _IDLE2, _E21: _IDLE1}
_DP_DISPATCH_TARGET = {_F11: _E12, _F12: _E21, _F21: _E12, _F22: _E21, _E12: _E21, _E21: _E12}


@dataclass
class SmallSystemSolution:
    """Average-cost solution of the two-region single-vehicle system.

    ``average_cost`` uses the un-normalized stage costs of the uniformized
    formulation (en-route states cost 1, empty-driving states 2, idle
    states the uniformized rate of requests missed at the other region), so
    it is comparable across solution methods but not with sample-path
    objective estimates.  ``policy`` maps each controllable state to
    ``"idle"`` or ``"dispatch"``.
    """

    average_cost: float
    differential: dict[str, float]
    policy: dict[str, str]

    def implied_rate_corner(self) -> tuple[float, float] | None:
        """The dispatch-rate corner this policy realizes, if uniform.

        Dispatching at every completion landing in region 1 is the same
        behavior as an infinite empty-dispatch rate out of region 1.
        Returns None for policies that treat landings in the same region
        inconsistently (none observed for generic rates).
        """
        to_2 = [self.policy[TWO_REGION_STATES[s]] for s in (_F11, _F21, _E21)]
        to_1 = [self.policy[TWO_REGION_STATES[s]] for s in (_F12, _F22, _E12)]
        if len(set(to_2)) > 1 or len(set(to_1)) > 1:
            return None
        return (inf if to_2[0] == "dispatch" else 0.0, inf if to_1[0] == "dispatch" else 0.0)


def _dp_tables(lam: np.ndarray, mu: np.ndarray):
    alpha = float(lam.sum() + mu.max())
    costs = np.zeros(8)
    costs[_IDLE1] = (lam[1, 0] + lam[1, 1]) / alpha
    costs[_IDLE2] = (lam[0, 0] + lam[0, 1]) / alpha
    costs[_F11] = costs[_F12] = costs[_F21] = costs[_F22] = 1.0
    costs[_E12] = costs[_E21] = 2.0

    def transition(state: int, dispatch: bool) -> np.ndarray:
        row = np.zeros(8)
        if state == _IDLE1:
            row[_F11] = lam[0, 0] / alpha
            row[_F12] = lam[0, 1] / alpha
            row[_IDLE1] = 1.0 - (lam[0, 0] + lam[0, 1]) / alpha
        elif state == _IDLE2:
            row[_F21] = lam[1, 0] / alpha
            row[_F22] = lam[1, 1] / alpha
            row[_IDLE2] = 1.0 - (lam[1, 0] + lam[1, 1]) / alpha
        else:
            i, j = _DP_COMPLETION_RATE[state]
            rate = mu[i, j] / alpha
            target = _DP_DISPATCH_TARGET[state] if dispatch else _DP_IDLE_TARGET[state]
            row[target] += rate
            row[state] += 1.0 - rate
        return row

    return alpha, costs, transition


def dp_small_system(lam: np.ndarray, mu: np.ndarray, method: str = "lp") -> SmallSystemSolution:
    """Solve the two-region single-vehicle average-cost control problem.

    ``method="lp"`` maximizes the average cost subject to the Bellman
    inequalities (differential costs as free variables, one pinned to 0);
    ``method="policy-iteration"`` alternates exact policy evaluation with
    greedy improvement.  The two must agree to solver precision.
    """
    lam, mu = _check_two_region(lam, mu)
    _, costs, transition = _dp_tables(lam, mu)
    actions = {s: (False, True) if s in _DP_CONTROLLABLE else (False,) for s in range(8)}

    if method == "lp":
        # variables: [average_cost, h(0..7)], h(0) pinned to zero
        n_var = 9
        rows, rhs = [], []
        for s in range(8):
            for dispatch in actions[s]:
                p = transition(s, dispatch)
                row = np.zeros(n_var)
                row[0] = 1.0
                row[1 + s] += 1.0
                row[1:] -= p
                rows.append(row)
                rhs.append(costs[s])
        lower = np.full(n_var, -np.inf)
        upper = np.full(n_var, np.inf)
        lower[1] = upper[1] = 0.0
        objective = np.zeros(n_var)
        objective[0] = 1.0
        sol = solve_lp(
            LinearProgram(
                objective=objective,
                lhs=np.array(rows),
                relations=["<="] * len(rows),
                rhs=np.array(rhs),
                lower=lower,
                upper=upper,
                maximize=True,
            )
        )
        if not sol.optimal:
            raise RuntimeError(f"small-system LP unexpectedly {sol.status}")
        avg = float(sol.value)
        h = sol.x[1:]
    elif method == "policy-iteration":
        policy = {s: False for s in _DP_CONTROLLABLE}
        for _ in range(64):
            p_mat = np.array([transition(s, policy.get(s, False)) for s in range(8)])
            # h + avg * 1 = g + P h with h(0) = 0
            a = np.zeros((8, 8))
            a[:, 0] = 1.0
            coeff = np.eye(8) - p_mat
            a[:, 1:] = coeff[:, 1:]
            solved = np.linalg.solve(a, costs)
            avg = float(solved[0])
            h = np.concatenate([[0.0], solved[1:]])
            improved = {}
            for s in _DP_CONTROLLABLE:
                q_idle = costs[s] + transition(s, False) @ h
                q_disp = costs[s] + transition(s, True) @ h
                improved[s] = bool(q_disp < q_idle - 1e-12)
            if improved == policy:
                break
            policy = improved
        else:
            raise RuntimeError("policy iteration failed to converge")
    else:
        raise ValueError("method must be 'lp' or 'policy-iteration'")

    chosen = {}
    for s in _DP_CONTROLLABLE:
        q_idle = costs[s] + transition(s, False) @ h
        q_disp = costs[s] + transition(s, True) @ h
        chosen[TWO_REGION_STATES[s]] = "dispatch" if q_disp < q_idle - 1e-12 else "idle"
    differential = {TWO_REGION_STATES[s]: float(h[s]) for s in range(8)}
    return SmallSystemSolution(average_cost=avg, differential=differential, policy=chosen)


@dataclass
class LowerBoundResult:
    """Fluid lower bound on the achievable average objective.

    ``ignored`` holds, per region, the fraction of its surplus request
    outflow that is written off rather than sated with empty-vehicle
    inflow; ``flows`` the sating empty-flow matrix (vehicles per unit
    time); the two component fractions combine into ``value`` with the
    configured weight.
    """

    value: float
    rejected_fraction: float
    empty_fraction: float
    ignored: np.ndarray
    flows: np.ndarray
    net_outflow: np.ndarray

    @property
    def components(self) -> tuple[float, float]:
        return (self.rejected_fraction, self.empty_fraction)


def lower_bound(config: SystemConfig, fleet_size: int | None = None, weight: float | None = None) -> LowerBoundResult:
    """Best average performance any controller could reach, on fluid flows.

    Requests are abstracted into flows; regions whose request outflow
    exceeds inflow must either write off the difference (costing rejected
    fraction) or have it sated by empty vehicles from the opposite kind of
    region (costing empty-driving fraction, cheaper for larger fleets).
    The optimal trade-off is a small LP, always feasible since writing
    everything off is allowed.
    """
    if not config.time_invariant:
        raise ValueError("the lower bound applies to time-invariant configurations")
    m = config.fleet_size if fleet_size is None else int(fleet_size)
    w = config.weight if weight is None else float(weight)
    lam = config.intervals[0].request_rates
    mu = config.intervals[0].travel_rates
    n = config.n_regions
    lam_total = float(lam.sum())
    net = lam.sum(axis=1) - lam.sum(axis=0)  # request outflow minus inflow
    losing = [j for j in range(n) if net[j] >= 0]  # drained of vehicles
    gaining = [i for i in range(n) if net[i] < 0]

    if lam_total == 0 or not gaining:
        zeros = np.zeros((n, n))
        return LowerBoundResult(0.0, 0.0, 0.0, np.zeros(n), zeros, net)

    n_beta = len(losing)
    arcs = [(i, j) for i in gaining for j in losing]
    n_var = n_beta + len(arcs)
    objective = np.zeros(n_var)
    for b, j in enumerate(losing):
        objective[b] = w * net[j] / lam_total
    for k, (i, j) in enumerate(arcs):
        objective[n_beta + k] = (1.0 - w) / (mu[i, j] * m)

    rows, relations, rhs = [], [], []
    for b, j in enumerate(losing):
        row = np.zeros(n_var)
        row[b] = net[j]
        for k, (i, jj) in enumerate(arcs):
            if jj == j:
                row[n_beta + k] = 1.0
        rows.append(row)
        relations.append("=")
        rhs.append(net[j])
    for i in gaining:
        row = np.zeros(n_var)
        for k, (ii, j) in enumerate(arcs):
            if ii == i:
                row[n_beta + k] = 1.0
        rows.append(row)
        relations.append("<=")
        rhs.append(-net[i])

    upper = np.full(n_var, np.inf)
    upper[:n_beta] = 1.0
    sol = solve_lp(
        LinearProgram(
            objective=objective,
            lhs=np.array(rows),
            relations=relations,
            rhs=np.array(rhs),
            upper=upper,
        )
    )
    if not sol.optimal:
        raise RuntimeError(f"lower-bound LP unexpectedly {sol.status}")

    ignored = np.zeros(n)
    for b, j in enumerate(losing):
        ignored[j] = sol.x[b]
    flows = np.zeros((n, n))
    for k, (i, j) in enumerate(arcs):
        flows[i, j] = max(sol.x[n_beta + k], 0.0)
    rejected = float(sum(net[j] * ignored[j] for j in losing) / lam_total)
    empty = float(sum(flows[i, j] / (mu[i, j] * m) for i, j in arcs))
    return LowerBoundResult(
        value=w * rejected + (1.0 - w) * empty,
        rejected_fraction=rejected,
        empty_fraction=empty,
        ignored=ignored,
        flows=flows,
        net_outflow=net,
    )
