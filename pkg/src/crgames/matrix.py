"""Zero-sum matrix games: value, optimal strategies, support patterns.

The solver is a primal/dual pair of linear programs run through the bounded
simplex in :mod:`crgames.lp`.  Strategies at this level are plain numpy
probability vectors over row/column indices; named MixedActions are attached
at the game layer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded, DimensionMismatch
from .lp import solve_lp

THETA_EQ = 1e-7  # membership in "equals the value" sets
THETA_STRICT = 1e-6  # margin required for "strictly exceeds"
SOLVER_TOL = 1e-9
PATTERN_CAP = 12


@dataclass(frozen=True)
class MatrixGame:
    """Row player maximizes, column player minimizes; entries in [0, 1]."""

    payoff: np.ndarray

    def __post_init__(self):
        payoff = np.asarray(self.payoff, dtype=float)
        if payoff.ndim != 2 or payoff.shape[0] < 1 or payoff.shape[1] < 1:
            raise ValueError("payoff must be a non-empty 2-D matrix")
        if payoff.min() < -1e-9 or payoff.max() > 1 + 1e-9:
            raise ValueError("payoff entries must lie in [0, 1]")
        payoff = np.clip(payoff, 0.0, 1.0)
        payoff.setflags(write=False)
        object.__setattr__(self, "payoff", payoff)

    @property
    def shape(self):
        return self.payoff.shape


@dataclass(frozen=True)
class MatrixSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    duality_gap: float


@dataclass(frozen=True)
class SupportPattern:
    """A realizable (support, tight-column-set) shape of optimal strategies."""

    row_support: frozenset[int]
    tight_columns: frozenset[int]
    witness: np.ndarray  # optimal row strategy with support exactly row_support
    slack: float  # worst margin: support mass / strict excess of loose columns


def payoff(mg: MatrixGame, sigma_a: np.ndarray, sigma_b: np.ndarray) -> float:
    """Expected payoff of a pair of mixed strategies."""
    sigma_a = np.asarray(sigma_a, dtype=float)
    sigma_b = np.asarray(sigma_b, dtype=float)
    m, n = mg.shape
    if sigma_a.shape != (m,) or sigma_b.shape != (n,):
        raise DimensionMismatch(
            f"strategy shapes {sigma_a.shape}/{sigma_b.shape} do not match {mg.shape}"
        )
    return float(sigma_a @ mg.payoff @ sigma_b)


def value_of_row_strategy(mg: MatrixGame, sigma_a: np.ndarray) -> float:
    """Worst-case payoff of a row strategy = min over pure columns."""
    sigma_a = np.asarray(sigma_a, dtype=float)
    if sigma_a.shape != (mg.shape[0],):
        raise DimensionMismatch("row strategy length does not match the matrix")
    return float((sigma_a @ mg.payoff).min())


def value_of_col_strategy(mg: MatrixGame, sigma_b: np.ndarray) -> float:
    """Worst-case payoff of a column strategy = max over pure rows."""
    sigma_b = np.asarray(sigma_b, dtype=float)
    if sigma_b.shape != (mg.shape[1],):
        raise DimensionMismatch("column strategy length does not match the matrix")
    return float((mg.payoff @ sigma_b).max())


def optimal_actions(mg: MatrixGame, sigma_a: np.ndarray, theta_eq: float = THETA_EQ) -> list[int]:
    """Columns achieving the value of the row strategy, within theta_eq."""
    sigma_a = np.asarray(sigma_a, dtype=float)
    col_payoffs = sigma_a @ mg.payoff
    v = col_payoffs.min()
    return [j for j in range(mg.shape[1]) if col_payoffs[j] <= v + theta_eq]


def _clean_distribution(vec: np.ndarray) -> np.ndarray:
    vec = np.where(vec > 1e-12, vec, 0.0)
    return vec / vec.sum()


def _minimizer_lp(matrix: np.ndarray) -> np.ndarray:
    """Optimal strategy of the minimizing (column) player of ``matrix``.

    Classic normalization: with entries shifted into [1, 2] the program
    max sum(w) s.t. M w <= 1, w >= 0 has optimum 1/value and the optimal
    column strategy is w * value.  The initial slack basis is feasible, so
    Bland's rule runs single-phase and returns a deterministic vertex.
    """
    shifted = matrix + 1.0
    m, n = shifted.shape
    res = solve_lp(c=-np.ones(n), a_ub=shifted, b_ub=np.ones(m))
    total = res.x.sum()
    if total <= 0:
        raise DimensionMismatch("degenerate matrix game")  # unreachable: entries >= 1
    return _clean_distribution(res.x / total)


def solve(mg: MatrixGame) -> MatrixSolution:
    """Minimax value and a pair of optimal vertex strategies."""
    column = _minimizer_lp(mg.payoff)
    # The row player of M is the column player of (2 - M^T): same routine.
    row = _minimizer_lp(1.0 - mg.payoff.T)
    lower = value_of_row_strategy(mg, row)
    upper = value_of_col_strategy(mg, column)
    gap = max(0.0, upper - lower)
    return MatrixSolution(
        value=(lower + upper) / 2.0,
        row_strategy=row,
        col_strategy=column,
        duality_gap=gap,
    )


def pattern_feasibility(
    mg: MatrixGame,
    row_support: frozenset[int],
    tight_columns: frozenset[int],
    value: float,
    theta_eq: float = THETA_EQ,
) -> tuple[float, np.ndarray | None]:
    """Best achievable slack for a (support, tight set) pattern.

    Maximizes a single slack variable s bounding, from below, every support
    mass and every loose column's excess over the value.  Returns (-inf, None)
    when infeasible.
    """
    m, n = mg.shape
    support = sorted(row_support)
    k = len(support)
    sub = mg.payoff[support, :]  # [k, n]

    # Variables: sigma over `support` then s; minimize -s.
    c = np.zeros(k + 1)
    c[-1] = -1.0
    a_eq = np.zeros((1, k + 1))
    a_eq[0, :k] = 1.0
    b_eq = np.array([1.0])

    a_ub = []
    b_ub = []
    for j in range(n):
        col = sub[:, j]
        if j in tight_columns:
            row = np.zeros(k + 1)
            row[:k] = col
            a_ub.append(row)
            b_ub.append(value + theta_eq)
            row = np.zeros(k + 1)
            row[:k] = -col
            a_ub.append(row)
            b_ub.append(-(value - theta_eq))
        else:
            row = np.zeros(k + 1)
            row[:k] = -col
            row[-1] = 1.0
            a_ub.append(row)
            b_ub.append(-value)
    for i in range(k):
        row = np.zeros(k + 1)
        row[i] = -1.0
        row[-1] = 1.0
        a_ub.append(row)
        b_ub.append(0.0)

    res = solve_lp(c, a_ub=np.array(a_ub), b_ub=np.array(b_ub), a_eq=a_eq, b_eq=b_eq)
    if not res.feasible:
        return -np.inf, None
    slack = -res.objective
    witness = np.zeros(m)
    witness[support] = np.maximum(res.x[:k], 0.0)
    witness /= witness.sum()
    return slack, witness


def enumerate_support_patterns(
    mg: MatrixGame,
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
    cap: int = PATTERN_CAP,
) -> list[SupportPattern]:
    """All realizable (support, tight-column) patterns of optimal strategies.

    A pattern is reported iff some optimal strategy has support exactly S
    (every mass >= slack), columns in T paying the value within theta_eq and
    columns outside T exceeding it by at least slack > theta_strict.
    """
    m, n = mg.shape
    if m > cap or n > cap:
        raise CapExceeded(f"matrix {m}x{n} exceeds the enumeration cap {cap}")
    value = solve(mg).value
    col_max = mg.payoff.max(axis=0)
    patterns: list[SupportPattern] = []
    rows = list(range(m))
    cols = list(range(n))
    for s_size in range(1, m + 1):
        for support in itertools.combinations(rows, s_size):
            support_set = frozenset(support)
            sub_max = mg.payoff[list(support), :].max(axis=0)
            for t_size in range(1, n + 1):
                for tight in itertools.combinations(cols, t_size):
                    tight_set = frozenset(tight)
                    # cheap necessary conditions before the LP
                    loose = [j for j in cols if j not in tight_set]
                    if any(sub_max[j] < value + theta_strict for j in loose):
                        continue
                    if any(col_max[j] < value - theta_eq for j in tight):
                        continue
                    slack, witness = pattern_feasibility(
                        mg, support_set, tight_set, value, theta_eq
                    )
                    if witness is None or slack <= theta_strict:
                        continue
                    patterns.append(
                        SupportPattern(
                            row_support=support_set,
                            tight_columns=tight_set,
                            witness=witness,
                            slack=slack,
                        )
                    )
    return patterns


# ---------------------------------------------------------------------------
# Fast value paths used by the fixed-point inner loop
# ---------------------------------------------------------------------------


def _two_by_two_mixed(Mx: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Interior solution of a 2x2 game without a pure saddle point."""
    d = Mx[0, 0] + Mx[1, 1] - Mx[0, 1] - Mx[1, 0]
    value = (Mx[0, 0] * Mx[1, 1] - Mx[0, 1] * Mx[1, 0]) / d
    row = np.array([(Mx[1, 1] - Mx[1, 0]) / d, (Mx[0, 0] - Mx[0, 1]) / d])
    col = np.array([(Mx[1, 1] - Mx[0, 1]) / d, (Mx[0, 0] - Mx[1, 0]) / d])
    return float(value), row, col


def quick_solution(matrix: np.ndarray) -> tuple[float, np.ndarray, np.ndarray] | None:
    """Closed-form (value, row, col) where one exists, else None."""
    matrix = np.asarray(matrix, dtype=float)
    m, n = matrix.shape
    row_min = matrix.min(axis=1)
    maximin = row_min.max()
    col_max = matrix.max(axis=0)
    minimax = col_max.min()
    if maximin >= minimax:  # pure saddle
        i = int(row_min.argmax())
        j = int(col_max.argmin())
        row = np.zeros(m)
        row[i] = 1.0
        col = np.zeros(n)
        col[j] = 1.0
        return float(maximin), row, col
    if (m, n) == (2, 2):
        d = matrix[0, 0] + matrix[1, 1] - matrix[0, 1] - matrix[1, 0]
        # near-degenerate denominators amplify rounding; leave those to the LP
        if abs(d) > 1e-6:
            return _two_by_two_mixed(matrix)
    return None


def game_values_batch(matrices: np.ndarray) -> np.ndarray:
    """Values of a stack of same-shape matrix games (vectorized fast paths).

    Saddle points and 2x2 interior optima are resolved by closed form in one
    numpy pass; remaining instances fall back to the LP solver.
    """
    matrices = np.asarray(matrices, dtype=float)
    k, m, n = matrices.shape
    row_min = matrices.min(axis=2)
    maximin = row_min.max(axis=1)
    col_max = matrices.max(axis=1)
    minimax = col_max.min(axis=1)
    values = np.where(maximin >= minimax, maximin, np.nan)
    unresolved = np.isnan(values)
    if unresolved.any() and (m, n) == (2, 2):
        M = matrices
        d = M[:, 0, 0] + M[:, 1, 1] - M[:, 0, 1] - M[:, 1, 0]
        ok = unresolved & (np.abs(d) > 1e-6)
        with np.errstate(divide="ignore", invalid="ignore"):
            mixed = (M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]) / d
        values[ok] = mixed[ok]
        unresolved = np.isnan(values)
    for idx in np.nonzero(unresolved)[0]:
        values[idx] = solve(MatrixGame(matrices[idx])).value
    # the value always lies in the hull of the entries
    return np.clip(values, row_min.min(axis=1), col_max.max(axis=1))
