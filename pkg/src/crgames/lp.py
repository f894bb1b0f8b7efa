"""Dense two-phase simplex with Bland's rule.

Small, deterministic LP core used by the matrix-game solver and the
support-pattern feasibility programs.  Problems are tiny (tens of variables),
so a plain tableau with O(mn) pricing per pivot is plenty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverDidNotConverge

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-11
_FEAS_TOL = 1e-8


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    feasible: bool


def solve_lp(
    c,
    a_ub=None,
    b_ub=None,
    a_eq=None,
    b_eq=None,
    max_pivots: int = 50_000,
) -> LpResult:
    """Minimize c.x subject to a_ub x <= b_ub, a_eq x = b_eq, x >= 0."""
    c = np.asarray(c, dtype=float)
    n = c.size
    rows = []
    rhs = []
    kinds = []  # "ub" | "eq"
    if a_ub is not None:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        for i in range(a_ub.shape[0]):
            rows.append(a_ub[i])
            rhs.append(float(np.asarray(b_ub, dtype=float).ravel()[i]))
            kinds.append("ub")
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        for i in range(a_eq.shape[0]):
            rows.append(a_eq[i])
            rhs.append(float(np.asarray(b_eq, dtype=float).ravel()[i]))
            kinds.append("eq")
    m = len(rows)
    if m == 0:
        return LpResult(x=np.zeros(n), objective=0.0, feasible=True)

    # Standard form: one slack per ub row, then flip rows to make rhs >= 0.
    n_slack = sum(1 for k in kinds if k == "ub")
    a = np.zeros((m, n + n_slack))
    b = np.zeros(m)
    slack_col = n
    slack_of_row = [-1] * m
    for i, (row, r, kind) in enumerate(zip(rows, rhs, kinds)):
        a[i, :n] = row
        b[i] = r
        if kind == "ub":
            a[i, slack_col] = 1.0
            slack_of_row[i] = slack_col
            slack_col += 1
    for i in range(m):
        if b[i] < 0:
            a[i] *= -1.0
            b[i] *= -1.0
            if slack_of_row[i] >= 0:
                slack_of_row[i] = -1  # flipped slack cannot start in the basis

    # Initial basis: usable slacks, artificials elsewhere.
    basis = [-1] * m
    art_cols = []
    for i in range(m):
        if slack_of_row[i] >= 0:
            basis[i] = slack_of_row[i]
    n_art = sum(1 for bvar in basis if bvar == -1)
    total = n + n_slack + n_art
    tableau = np.zeros((m, total + 1))
    tableau[:, : n + n_slack] = a
    tableau[:, -1] = b
    col = n + n_slack
    for i in range(m):
        if basis[i] == -1:
            tableau[i, col] = 1.0
            basis[i] = col
            art_cols.append(col)
            col += 1

    is_art = np.zeros(total, dtype=bool)
    for j in art_cols:
        is_art[j] = True

    def run(cost: np.ndarray, allow: np.ndarray) -> None:
        pivots = 0
        while True:
            cb = cost[basis]
            z = cost - cb @ tableau[:, :total]
            entering = -1
            for j in range(total):  # Bland: smallest eligible index
                if allow[j] and j not in basis and z[j] < -_COST_TOL:
                    entering = j
                    break
            if entering < 0:
                return
            colv = tableau[:, entering]
            best_i = -1
            best_ratio = np.inf
            for i in range(m):
                if colv[i] > _PIVOT_TOL:
                    ratio = tableau[i, -1] / colv[i]
                    if ratio < best_ratio - 1e-12 or (
                        abs(ratio - best_ratio) <= 1e-12
                        and (best_i < 0 or basis[i] < basis[best_i])
                    ):
                        best_ratio = ratio
                        best_i = i
            if best_i < 0:
                raise SolverDidNotConverge("LP is unbounded", residuals={"entering": entering})
            piv = tableau[best_i, entering]
            tableau[best_i] /= piv
            for i in range(m):
                if i != best_i and abs(tableau[i, entering]) > 1e-14:
                    tableau[i] -= tableau[i, entering] * tableau[best_i]
            basis[best_i] = entering
            pivots += 1
            if pivots > max_pivots:
                raise SolverDidNotConverge(
                    "simplex pivot cap exceeded",
                    residuals={"pivots": pivots},
                )

    if art_cols:
        phase1_cost = np.zeros(total)
        phase1_cost[is_art] = 1.0
        run(phase1_cost, allow=np.ones(total, dtype=bool))
        infeas = float(phase1_cost[basis] @ tableau[:, -1])
        if infeas > _FEAS_TOL:
            return LpResult(x=np.zeros(n), objective=np.nan, feasible=False)
        # Drive any leftover artificial out of the basis (degenerate rows).
        for i in range(m):
            if is_art[basis[i]]:
                pivot_j = -1
                for j in range(n + n_slack):
                    if abs(tableau[i, j]) > _PIVOT_TOL:
                        pivot_j = j
                        break
                if pivot_j < 0:
                    continue  # redundant row; leave the zero artificial in place
                piv = tableau[i, pivot_j]
                tableau[i] /= piv
                for k in range(m):
                    if k != i and abs(tableau[k, pivot_j]) > 1e-14:
                        tableau[k] -= tableau[k, pivot_j] * tableau[i]
                basis[i] = pivot_j

    full_cost = np.zeros(total)
    full_cost[:n] = c
    allow = ~is_art
    run(full_cost, allow=allow)

    x = np.zeros(total)
    for i in range(m):
        x[basis[i]] = tableau[i, -1]
    xs = x[:n]
    return LpResult(x=xs.copy(), objective=float(c @ xs), feasible=True)
