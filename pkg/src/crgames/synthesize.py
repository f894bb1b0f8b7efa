"""Positional strategy synthesis for the maximizing player.

Secure states receive their efficient witness strategies; on the remaining
(sub-maximizable) states the strategy plays optimally against a valuation
that strictly increases under the value operator, built by the
increasing-valuation construction.  Every synthesized strategy is
post-verified by exact best-response evaluation before being returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionFailed, DegenerateGap
from .fixpoint import apply_delta_vector, local_matrices, zero_value_set
from .matrix import THETA_EQ, THETA_STRICT, MatrixGame, optimal_actions, solve, value_of_row_strategy
from .mdp import check_local_domination, evaluate_against_best_a, evaluate_against_best_b, optimal_b_strategy
from .model import (
    ClassificationReport,
    ConcurrentGame,
    MixedAction,
    PositionalStrategy,
    StateValuation,
)

VERIFY_TOL = 1e-4


@dataclass(frozen=True)
class SynthesisResult:
    strategy: PositionalStrategy
    guarantee: StateValuation  # valuation the strategy provably dominates
    epsilon: float  # effective epsilon used on sub-maximizable states
    eta: float  # optimal-action gap over the secure states
    provenance: dict[str, str]  # "efficient[level]" | "bad-construction" | "sink"
    achieved: StateValuation  # exact best-response value of the strategy


def optimal_action_gap(
    game: ConcurrentGame,
    m: StateValuation,
    sa_by_state: dict[str, MixedAction],
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
) -> float:
    """Smallest payoff excess of a non-optimal column over the strategy value.

    Taken over the given (secure) states; states where every column is
    optimal contribute the neutral gap 1.
    """
    matrices = local_matrices(game, m.vector(game))
    eta = 1.0
    for q, ma in sa_by_state.items():
        mg = MatrixGame(matrices[game.state_index(q)])
        sigma = ma.vector(game.actions_a)
        col_payoffs = sigma @ mg.payoff
        val = col_payoffs.min()
        non_optimal = [j for j in range(mg.shape[1]) if col_payoffs[j] > val + theta_eq]
        if not non_optimal:
            continue
        gap = min(col_payoffs[j] - val for j in non_optimal)
        eta = min(eta, float(gap))
    if eta <= theta_strict:
        raise DegenerateGap(
            f"optimal-action gap {eta} is below theta_strict; margins too thin"
        )
    return eta


def _pinned_delta(game: ConcurrentGame, m_vec: np.ndarray, g_mask: np.ndarray):
    """Value operator frozen to the target values on the kept set."""

    def apply(vec: np.ndarray) -> np.ndarray:
        out = apply_delta_vector(game, vec)
        out[g_mask] = m_vec[g_mask]
        return out

    return apply


def increasing_valuation(
    game: ConcurrentGame,
    m: StateValuation,
    keep: frozenset[str],
    eps: float,
    theta_strict: float = THETA_STRICT,
    max_power: int = 10_000,
) -> StateValuation:
    """Valuation below m, epsilon-close, equal to m on ``keep``, strictly
    increasing under the value operator everywhere else.

    Follows the constructive proof: start at m shifted down, find a power k
    of the pinned operator that strictly increases every free component,
    then repeatedly reduce k to 1 by splitting components into "already
    increasing" and "stationary" groups and shifting by half the worst margin.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    zero = zero_value_set(game)
    free_states = [q for q in game.states if q not in keep]
    if not free_states:
        return m
    if any(q in zero for q in free_states):
        raise ValueError("free states must avoid the exact zero set")

    m_vec = m.vector(game)
    g_mask = np.array([q in keep for q in game.states])
    free = ~g_mask
    f = _pinned_delta(game, m_vec, g_mask)

    iota = min(eps, float(m_vec[free].min()))
    w = np.clip(m_vec - iota, 0.0, 1.0)

    # Smallest power k after which every free component rose by a workable
    # margin.  Tiny increases (value-iteration residue) must not count: the
    # k -> 1 reduction halves margins, so the floor has to clear the final
    # strictness gate with room to spare.
    floor = max(32.0 * theta_strict, min(iota / 4.0, 1e-3))
    cur = w
    k = None
    for step in range(1, max_power + 1):
        cur = f(cur)
        if ((cur - w)[free] >= floor).all():
            k = step
            break
    if k is None:
        raise ConstructionFailed(
            "pinned operator never lifted all free components above the margin floor",
            residuals={
                "max_power": max_power,
                "floor": floor,
                "worst": float((cur - w)[free].min()),
            },
        )

    # Reduce k to 1: hold components that are stationary after k-1 powers,
    # lift the rising ones to just under their (k-1)-power image.
    group_tol = 1e-12
    while k > 1:
        fk1 = _power(f, w, k - 1)
        fk = f(fk1)
        diff1 = fk1 - w
        stationary = free & (diff1 <= group_tol)
        rising = diff1 > group_tol
        margins = []
        if stationary.any():
            margins.append(float((fk - w)[stationary].min()))
        if rising.any():
            margins.append(float(diff1[rising].min()))
        margin = min(margins)
        if margin <= 4.0 * group_tol:
            raise ConstructionFailed(
                "reduction margin collapsed; values not converged tightly enough",
                residuals={"k": k, "margin": margin},
            )
        w_next = w.copy()
        w_next[rising] = fk1[rising] - margin / 2.0
        w = np.clip(np.maximum(w, w_next), 0.0, 1.0)
        k -= 1

    v = np.where(g_mask, m_vec, w)
    # verification before returning: strict increase on every free component
    delta_v = apply_delta_vector(game, v)
    worst = float((delta_v - v)[free].min())
    if worst <= theta_strict:
        raise ConstructionFailed(
            "constructed valuation fails the strict-increase check",
            residuals={"worst_margin": worst},
        )
    if (v > m_vec + 1e-9).any() or float(np.abs(m_vec - v).max()) > eps + 1e-9:
        raise ConstructionFailed(
            "constructed valuation left the [m - eps, m] band",
            residuals={"max_dev": float(np.abs(m_vec - v).max())},
        )
    return StateValuation.from_vector(game, v)


def _power(f, w: np.ndarray, k: int) -> np.ndarray:
    cur = w
    for _ in range(k):
        cur = f(cur)
    return cur


def synthesize_a(
    game: ConcurrentGame,
    report: ClassificationReport,
    eps: float,
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
) -> SynthesisResult:
    """Positional strategy optimal on the maximizable states and
    epsilon-optimal on the rest, assembled per the classification report."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = report.values
    m_vec = m.vector(game)
    zero = report.zero_set
    secure = report.max_states
    bad = report.submax_states
    levels = report.sec_hierarchy[-1]

    choices: dict[str, MixedAction] = {}
    provenance: dict[str, str] = {}
    sinkish = {game.target} | set(zero)
    for q in secure:
        if q in sinkish:
            choices[q] = MixedAction.uniform(game.actions_a)
            provenance[q] = "sink"
        else:
            choices[q] = report.witnesses[q]
            level = next(i for i, lvl in enumerate(levels) if q in lvl)
            provenance[q] = f"efficient[{level}]"

    eta = optimal_action_gap(
        game, m, {q: choices[q] for q in secure}, theta_eq=theta_eq, theta_strict=theta_strict
    )
    eps_eff = min(eta, eps)

    if bad:
        v = increasing_valuation(game, m, frozenset(secure), eps_eff, theta_strict=theta_strict)
        v_vec = v.vector(game)
        matrices = local_matrices(game, v_vec)
        for q in bad:
            sol = solve(MatrixGame(matrices[game.state_index(q)]))
            choices[q] = MixedAction.from_vector(game.actions_a, sol.row_strategy)
            provenance[q] = "bad-construction"
    else:
        v = m
        v_vec = m_vec

    strategy = PositionalStrategy("A", choices)

    # Post-verification: synthesis never trusts its own construction.
    achieved = evaluate_against_best_b(game, strategy).values
    achieved_vec = achieved.vector(game)
    if (achieved_vec < v_vec - VERIFY_TOL).any():
        raise ConstructionFailed(
            "synthesized strategy does not guarantee its valuation",
            residuals={"worst": float((v_vec - achieved_vec).max())},
        )
    secure_idx = [game.state_index(q) for q in secure]
    if any(abs(achieved_vec[i] - m_vec[i]) > VERIFY_TOL for i in secure_idx):
        raise ConstructionFailed(
            "synthesized strategy is not optimal on the maximizable states",
            residuals={
                "worst": max(abs(achieved_vec[i] - m_vec[i]) for i in secure_idx)
            },
        )
    return SynthesisResult(
        strategy=strategy,
        guarantee=v,
        epsilon=eps_eff,
        eta=eta,
        provenance=provenance,
        achieved=achieved,
    )


def synthesize_b(game: ConcurrentGame, m: StateValuation) -> PositionalStrategy:
    """Column-optimal positional strategy; verified to cap the opponent at m."""
    sb = optimal_b_strategy(game, m)
    sup_a = evaluate_against_best_a(game, sb).values.vector(game)
    m_vec = m.vector(game)
    if (sup_a > m_vec + VERIFY_TOL).any():
        raise ConstructionFailed(
            "column strategy fails to bound the opponent at the game values",
            residuals={"worst": float((sup_a - m_vec).max())},
        )
    return sb
