"""The one-step value operator, its least fixed point, and the zero set.

Values are computed by plain Kleene iteration from below (monotone,
1-Lipschitz operator), with the exact combinatorial zero set pinned to 0.0
throughout.  The iterate at the target is 1 by definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix import MatrixGame, game_values_batch, solve
from .model import ConcurrentGame, NatureValuation, StateValuation

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10**6


@dataclass(frozen=True)
class FixpointResult:
    values: StateValuation
    iterations: int
    residual: float
    converged: bool

    def vector(self, game: ConcurrentGame) -> np.ndarray:
        return self.values.vector(game)


def lift(game: ConcurrentGame, v: StateValuation) -> NatureValuation:
    """Convex-combination lift of a state valuation to the Nature states."""
    vec = v.vector(game)
    mu = game.dist @ vec
    return NatureValuation({d: float(mu[i]) for i, d in enumerate(game.nature)})


def lift_vector(game: ConcurrentGame, vec: np.ndarray) -> np.ndarray:
    return game.dist @ vec


def local_matrices(game: ConcurrentGame, vec: np.ndarray) -> np.ndarray:
    """Stack of local payoff matrices [Q, A, B] under the lifted valuation."""
    mu = lift_vector(game, vec)
    return mu[game.delta]


def apply_delta_vector(game: ConcurrentGame, vec: np.ndarray) -> np.ndarray:
    """One application of the value operator on a raw vector."""
    out = game_values_batch(local_matrices(game, vec))
    out[game.target_index] = 1.0
    return out


def apply_delta(game: ConcurrentGame, v: StateValuation) -> StateValuation:
    """Value operator: 1 at the target, local matrix-game value elsewhere.

    Equivalent (within 1e-9) to solving each local game with
    :func:`crgames.matrix.solve`; the batched closed-form paths are used for
    speed and are cross-checked against the LP solver in the test suite.
    """
    return StateValuation.from_vector(game, apply_delta_vector(game, v.vector(game)))


def zero_value_set(game: ConcurrentGame) -> frozenset[str]:
    """States of value exactly 0, computed combinatorially (no tolerance).

    Complement of the least fixed point P: start from the target; add q when,
    whatever column the opponent picks, some row has positive probability of
    entering P.  Value 0 means the opponent can trap play away from the
    target, which is exactly the complement of P.
    """
    supp = game.dist > 0.0  # [D, Q]
    positive = np.zeros(game.n_states, dtype=bool)
    positive[game.target_index] = True
    while True:
        reach_p = supp[:, positive].any(axis=1)  # [D]
        cond = reach_p[game.delta].any(axis=1).all(axis=1)  # exists row, for all cols
        new = positive | cond
        if (new == positive).all():
            break
        positive = new
    return frozenset(game.states[i] for i in np.nonzero(~positive)[0])


def least_fixed_point(
    game: ConcurrentGame,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    trace: list | None = None,
) -> FixpointResult:
    """Kleene iteration from the bottom element of the value lattice.

    Iterates are monotone non-decreasing and below the true value vector.
    States in the exact zero set are pinned to 0.0.  Non-convergence within
    ``max_iter`` is a reported status, not a failure.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    zero_idx = np.array(
        [game.state_index(q) for q in zero_value_set(game)], dtype=int
    )
    v = np.zeros(game.n_states)
    v[game.target_index] = 1.0
    if trace is not None:
        trace.append(v.copy())
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = apply_delta_vector(game, v)
        if zero_idx.size:
            nxt[zero_idx] = 0.0
        step = float(np.abs(nxt - v).max())
        v = nxt
        if trace is not None:
            trace.append(v.copy())
        if step <= tol:
            converged = True
            break
    final_residual = float(np.abs(apply_delta_vector(game, v) - v).max())
    return FixpointResult(
        values=StateValuation.from_vector(game, v),
        iterations=iterations,
        residual=final_residual,
        converged=converged,
    )
