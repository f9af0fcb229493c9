"""Dense simplex solver for the small linear programs in this package.

Every LP solved here is tiny (at most a few dozen variables), so a dense
two-phase tableau with Bland's anti-cycling rule is adequate and keeps the
numerics easy to reason about.  Inputs are expected to be scaled O(1); no
internal rescaling is applied, and feasibility/optimality are resolved at a
fixed 1e-9 tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LinearProgram", "LPSolution", "solve_lp"]

TOL = 1e-9
_PIVOT_TOL = 1e-10


@dataclass
class LinearProgram:
    """min (or max) ``objective @ x`` subject to row constraints and bounds.

    ``relations`` holds one of ``"<="``, ``"="``, ``">="`` per row.  Bounds
    default to ``x >= 0``; use ``-inf`` lower bounds for free variables.
    """

    objective: np.ndarray
    lhs: np.ndarray
    relations: list[str]
    rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    maximize: bool = False

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        self.lhs = np.atleast_2d(np.asarray(self.lhs, dtype=float))
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.objective.shape[0]
        m = self.lhs.shape[0]
        if self.lhs.shape != (m, n):
            raise ValueError("constraint matrix shape does not match objective")
        if self.rhs.shape != (m,):
            raise ValueError("rhs length does not match constraint count")
        if len(self.relations) != m:
            raise ValueError("one relation per constraint row required")
        for rel in self.relations:
            if rel not in ("<=", "=", ">="):
                raise ValueError(f"unknown relation {rel!r}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def n_rows(self) -> int:
        return self.lhs.shape[0]


@dataclass
class LPSolution:
    """Outcome of a solve.

    ``duals`` has one multiplier per original constraint row (sign
    convention: value increase per unit increase of the rhs, for the
    minimization form).  ``duality_gap`` is |primal - dual| on the
    standardized problem and should sit at rounding level for any solved
    instance.
    """

    status: str
    value: float = np.nan
    x: np.ndarray = field(default_factory=lambda: np.empty(0))
    duals: np.ndarray = field(default_factory=lambda: np.empty(0))
    duality_gap: float = np.nan

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]


def _simplex(tableau: np.ndarray, basis: np.ndarray, costs: np.ndarray, allowed: np.ndarray) -> str:
    """Minimize ``costs`` over the tableau in place; Bland's rule throughout.

    ``allowed`` masks columns eligible to enter (drops artificials in phase
    two).  The cost row is rebuilt from the current basis each call.
    """
    m = tableau.shape[0]
    z = costs - costs[basis] @ tableau[:, :-1]
    while True:
        entering = -1
        for j in range(tableau.shape[1] - 1):
            if allowed[j] and z[j] < -TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        leaving, best = -1, np.inf
        for r in range(m):
            a = tableau[r, entering]
            if a > _PIVOT_TOL:
                ratio = tableau[r, -1] / a
                if ratio < best - _PIVOT_TOL or (
                    abs(ratio - best) <= _PIVOT_TOL and (leaving < 0 or basis[r] < basis[leaving])
                ):
                    best = ratio
                    leaving = r
        if leaving < 0:
            return "unbounded"
        _pivot(tableau, leaving, entering)
        basis[leaving] = entering
        z = costs - costs[basis] @ tableau[:, :-1]


def solve_lp(lp: LinearProgram) -> LPSolution:
    """Solve the LP; statuses are ``optimal``, ``infeasible``, ``unbounded``."""
    n = lp.n_vars
    sense = -1.0 if lp.maximize else 1.0
    c_user = sense * lp.objective

    # Variable transformation to x' >= 0: shifted, flipped, or split columns.
    cols: list[np.ndarray] = []
    col_costs: list[float] = []
    col_map: list[tuple[int, str]] = []  # (original var, 'shift'|'flip'|'pos'|'neg')
    offset = 0.0
    b = lp.rhs.astype(float).copy()
    ub_rows: list[tuple[int, float]] = []  # (column index, residual bound)
    for k in range(n):
        lo, hi, a_k = lp.lower[k], lp.upper[k], lp.lhs[:, k]
        if np.isneginf(lo) and np.isposinf(hi):
            col_map.append((k, "pos"))
            cols.append(a_k)
            col_costs.append(c_user[k])
            col_map.append((k, "neg"))
            cols.append(-a_k)
            col_costs.append(-c_user[k])
        elif np.isneginf(lo):
            # x = hi - s with s >= 0
            b -= a_k * hi
            offset += c_user[k] * hi
            col_map.append((k, "flip"))
            cols.append(-a_k)
            col_costs.append(-c_user[k])
        else:
            if lo != 0.0:
                b -= a_k * lo
                offset += c_user[k] * lo
            col_map.append((k, "shift"))
            cols.append(a_k)
            col_costs.append(c_user[k])
            if np.isfinite(hi):
                ub_rows.append((len(cols) - 1, hi - lo))

    a_mat = np.column_stack(cols) if cols else np.zeros((lp.n_rows, 0))
    relations = list(lp.relations)
    rhs_all = list(b)
    rows = [a_mat[r] for r in range(lp.n_rows)]
    for col_idx, residual in ub_rows:
        row = np.zeros(len(cols))
        row[col_idx] = 1.0
        rows.append(row)
        relations.append("<=")
        rhs_all.append(residual)

    # Equality form: one slack per inequality, then flip rows to b >= 0.
    n_struct = len(cols)
    n_rows_all = len(rows)
    slack_cols = sum(1 for rel in relations if rel != "=")
    a_std = np.zeros((n_rows_all, n_struct + slack_cols))
    c_std = np.zeros(n_struct + slack_cols)
    c_std[:n_struct] = col_costs
    b_std = np.array(rhs_all, dtype=float)
    row_sign = np.ones(n_rows_all)
    s = n_struct
    for r, rel in enumerate(relations):
        a_std[r, :n_struct] = rows[r]
        if rel == "<=":
            a_std[r, s] = 1.0
            s += 1
        elif rel == ">=":
            a_std[r, s] = -1.0
            s += 1
        if b_std[r] < 0:
            a_std[r] *= -1.0
            b_std[r] *= -1.0
            row_sign[r] = -1.0

    # Phase one: artificial basis.
    n_total = a_std.shape[1]
    tableau = np.zeros((n_rows_all, n_total + n_rows_all + 1))
    tableau[:, :n_total] = a_std
    tableau[:, n_total : n_total + n_rows_all] = np.eye(n_rows_all)
    tableau[:, -1] = b_std
    basis = np.arange(n_total, n_total + n_rows_all)
    phase1_costs = np.zeros(n_total + n_rows_all)
    phase1_costs[n_total:] = 1.0
    allowed = np.ones(n_total + n_rows_all, dtype=bool)
    _simplex(tableau, basis, phase1_costs, allowed)
    if phase1_costs[basis] @ tableau[:, -1] > 1e-7:
        return LPSolution(status="infeasible")

    # Pivot remaining artificials out; rows where that fails are redundant.
    keep = np.ones(n_rows_all, dtype=bool)
    for r in range(n_rows_all):
        if basis[r] >= n_total:
            done = False
            for j in range(n_total):
                if abs(tableau[r, j]) > 1e-7:
                    _pivot(tableau, r, j)
                    basis[r] = j
                    done = True
                    break
            if not done:
                keep[r] = False
    if not np.all(keep):
        tableau = tableau[keep]
        basis = basis[keep]

    # Phase two on structural and slack columns only.
    allowed[n_total:] = False
    phase2_costs = np.concatenate([c_std, np.zeros(n_rows_all)])
    status = _simplex(tableau, basis, phase2_costs, allowed)
    if status == "unbounded":
        return LPSolution(status="unbounded")

    x_std = np.zeros(n_total)
    for r, bi in enumerate(basis):
        if bi < n_total:
            x_std[bi] = tableau[r, -1]

    # Map back to user variables.
    x = np.zeros(n)
    for idx, (k, kind) in enumerate(col_map):
        v = x_std[idx]
        if kind == "shift":
            x[k] = lp.lower[k] + v
        elif kind == "flip":
            x[k] = lp.upper[k] - v
        elif kind == "pos":
            x[k] += v
        else:
            x[k] -= v
    value_min = float(c_std[:n_struct] @ x_std[:n_struct] + offset)

    # Duals from the final basis: solve B^T y = c_B over the kept rows of the
    # standardized system (all basic variables are structural/slack by now),
    # then undo row flips and restrict to the caller's constraints.
    rows_kept = np.flatnonzero(keep)
    a_kept = a_std[rows_kept]
    b_kept = b_std[rows_kept]
    basis_mat = a_kept[:, basis]
    try:
        y_kept = np.linalg.solve(basis_mat.T, phase2_costs[basis])
    except np.linalg.LinAlgError:
        y_kept = np.linalg.lstsq(basis_mat.T, phase2_costs[basis], rcond=None)[0]
    gap = abs(float(y_kept @ b_kept) + offset - value_min)

    y = np.zeros(n_rows_all)
    y[rows_kept] = y_kept
    y *= row_sign
    duals = y[: lp.n_rows] * sense
    return LPSolution(
        status="optimal",
        value=sense * value_min,
        x=x,
        duals=duals,
        duality_gap=gap,
    )
