"""Induced MDPs, end components, BSCCs, and exact strategy evaluation.

Policy evaluation is exact (linear solve on transient states); optimization
against a fixed opponent strategy is policy iteration over pure positional
policies, preceded by a qualitative pin-to-zero pass so the iteration cannot
stall on probability-zero cycles.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import SingularSystem
from .matrix import MatrixGame, value_of_row_strategy
from .model import ConcurrentGame, MixedAction, PositionalStrategy, StateValuation

STRUCTURAL_ZERO = 1e-12  # probabilities below this are structural zeros
IMPROVE_TOL = 1e-10  # single-state policy switch threshold


@dataclass(frozen=True)
class InducedMdp:
    """One-player (column) MDP left after fixing a row-player strategy."""

    game: ConcurrentGame
    iota: np.ndarray  # [Q, B, Q]

    @property
    def states(self):
        return self.game.states

    @property
    def actions(self):
        return self.game.actions_b


@dataclass(frozen=True)
class EndComponent:
    states: frozenset[str]
    actions: dict[str, frozenset[str]]  # enabled actions per member state


@dataclass(frozen=True)
class BestResponse:
    values: StateValuation
    strategy: PositionalStrategy


@dataclass(frozen=True)
class DominationReport:
    margins: dict[str, float]  # strategy value minus the target valuation
    violations: tuple[str, ...]  # states failing below -theta_eq


def _cell_transitions(game: ConcurrentGame) -> np.ndarray:
    """dist composed with delta: [Q, A, B, Q]."""
    return game.dist[game.delta]


def induce_mdp(game: ConcurrentGame, sa: PositionalStrategy) -> InducedMdp:
    """MDP over the column player's actions once the row strategy is fixed."""
    if sa.player != "A":
        raise ValueError("induce_mdp expects a row-player (A) strategy")
    sa_mat = sa.matrix(game)  # [Q, A]
    iota = np.einsum("qa,qabs->qbs", sa_mat, _cell_transitions(game))
    return InducedMdp(game=game, iota=iota)


def induce_mdp_for_a(game: ConcurrentGame, sb: PositionalStrategy) -> np.ndarray:
    """Row-player MDP kernel [Q, A, Q] once the column strategy is fixed."""
    if sb.player != "B":
        raise ValueError("expected a column-player (B) strategy")
    sb_mat = sb.matrix(game)  # [Q, B]
    return np.einsum("qb,qabs->qas", sb_mat, _cell_transitions(game))


def chain_matrix(game: ConcurrentGame, sa: PositionalStrategy, sb: PositionalStrategy) -> np.ndarray:
    """Markov chain [Q, Q] induced by a positional strategy pair."""
    sa_mat = sa.matrix(game)
    sb_mat = sb.matrix(game)
    return np.einsum("qa,qb,qabs->qs", sa_mat, sb_mat, _cell_transitions(game))


def maximal_end_components(mdp: InducedMdp) -> list[EndComponent]:
    """Standard MEC decomposition by iterative SCC pruning."""
    game = mdp.game
    n_q = game.n_states
    n_b = mdp.iota.shape[1]
    supp = mdp.iota > STRUCTURAL_ZERO  # [Q, B, Q]
    alive = np.ones(n_q, dtype=bool)
    enabled = np.ones((n_q, n_b), dtype=bool)

    while True:
        graph = nx.DiGraph()
        graph.add_nodes_from(np.nonzero(alive)[0].tolist())
        for q in np.nonzero(alive)[0]:
            for b in np.nonzero(enabled[q])[0]:
                for q2 in np.nonzero(supp[q, b])[0]:
                    graph.add_edge(int(q), int(q2))
        scc_of = {}
        for comp_id, comp in enumerate(nx.strongly_connected_components(graph)):
            for q in comp:
                scc_of[q] = comp_id
        changed = False
        for q in np.nonzero(alive)[0]:
            for b in np.nonzero(enabled[q])[0]:
                succ = np.nonzero(supp[q, b])[0]
                if any((not alive[s]) or scc_of.get(int(s)) != scc_of[int(q)] for s in succ):
                    enabled[q, b] = False
                    changed = True
            if not enabled[q].any():
                alive[q] = False
                changed = True
        if not changed:
            break

    groups: dict[int, list[int]] = {}
    graph = nx.DiGraph()
    graph.add_nodes_from(np.nonzero(alive)[0].tolist())
    for q in np.nonzero(alive)[0]:
        for b in np.nonzero(enabled[q])[0]:
            for q2 in np.nonzero(supp[q, b])[0]:
                graph.add_edge(int(q), int(q2))
    for comp in nx.strongly_connected_components(graph):
        comp = sorted(comp)
        # singleton without a kept self-closed action is not an EC
        if len(comp) == 1 and not enabled[comp[0]].any():
            continue
        mecs_states = frozenset(game.states[q] for q in comp)
        actions = {
            game.states[q]: frozenset(
                game.actions_b[b] for b in np.nonzero(enabled[q])[0]
            )
            for q in comp
        }
        groups[min(comp)] = EndComponent(states=mecs_states, actions=actions)
    return [groups[k] for k in sorted(groups)]


def bsccs_under(mdp: InducedMdp, sb: PositionalStrategy) -> list[frozenset[str]]:
    """Bottom SCCs of the Markov chain obtained by also fixing sb."""
    game = mdp.game
    sb_mat = sb.matrix(game)
    chain = np.einsum("qb,qbs->qs", sb_mat, mdp.iota)
    return chain_bsccs(game, chain)


def chain_bsccs(game: ConcurrentGame, chain: np.ndarray) -> list[frozenset[str]]:
    supp = chain > STRUCTURAL_ZERO
    graph = nx.DiGraph()
    graph.add_nodes_from(range(game.n_states))
    for q in range(game.n_states):
        for q2 in np.nonzero(supp[q])[0]:
            graph.add_edge(int(q), int(q2))
    out = []
    for comp in nx.strongly_connected_components(graph):
        members = np.zeros(game.n_states, dtype=bool)
        members[list(comp)] = True
        if all(not (supp[q] & ~members).any() for q in comp):
            out.append(frozenset(game.states[q] for q in sorted(comp)))
    return sorted(out, key=lambda c: sorted(c))


def _absorption(chain: np.ndarray, target: int, game: ConcurrentGame) -> np.ndarray:
    """Exact reach-target probabilities of a chain via a transient solve."""
    n = chain.shape[0]
    supp = chain > STRUCTURAL_ZERO
    # states that can reach the target at all
    can_reach = np.zeros(n, dtype=bool)
    can_reach[target] = True
    frontier = [target]
    preds = [np.nonzero(supp[:, q])[0] for q in range(n)]
    while frontier:
        q = frontier.pop()
        for p in preds[q]:
            if not can_reach[p]:
                can_reach[p] = True
                frontier.append(int(p))
    x = np.zeros(n)
    x[target] = 1.0
    transient = np.nonzero(can_reach & (np.arange(n) != target))[0]
    if transient.size:
        sub = chain[np.ix_(transient, transient)]
        rhs = chain[transient, target]
        try:
            x[transient] = np.linalg.solve(np.eye(transient.size) - sub, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(
                "degenerate chain during exact evaluation",
                states=[game.states[q] for q in transient],
            ) from exc
    return np.clip(x, 0.0, 1.0)


def evaluate_pair(
    game: ConcurrentGame, sa: PositionalStrategy, sb: PositionalStrategy
) -> StateValuation:
    """Exact reach-target probability from every state for a strategy pair."""
    chain = chain_matrix(game, sa, sb)
    x = _absorption(chain, game.target_index, game)
    return StateValuation.from_vector(game, x)


def finite_horizon_prob(
    game: ConcurrentGame, sa: PositionalStrategy, sb: PositionalStrategy, q: str, n: int
) -> float:
    """Probability of reaching the target within n steps (backward recursion)."""
    chain = chain_matrix(game, sa, sb)
    reach = np.zeros(game.n_states)
    reach[game.target_index] = 1.0
    for _ in range(n):
        reach = chain @ reach
        reach[game.target_index] = 1.0
    return float(reach[game.state_index(q)])


def finite_horizon_reach_set(chain: np.ndarray, targets: np.ndarray, n: int) -> np.ndarray:
    """Probability of entering the target set within n steps, per start state."""
    hit = targets.astype(float)
    for _ in range(n):
        hit = np.where(targets, 1.0, chain @ hit)
    return hit


# ---------------------------------------------------------------------------
# Policy iteration against a fixed opponent
# ---------------------------------------------------------------------------


def _policy_chain(kernel: np.ndarray, policy: np.ndarray) -> np.ndarray:
    return kernel[np.arange(kernel.shape[0]), policy]


def _closed_avoid_set(kernel: np.ndarray, target: int) -> np.ndarray:
    """Largest set avoiding the target in which some action stays inside."""
    n = kernel.shape[0]
    supp = kernel > STRUCTURAL_ZERO  # [Q, Act, Q]
    inside = np.ones(n, dtype=bool)
    inside[target] = False
    while True:
        stays = (~supp | inside[None, None, :]).all(axis=2)  # [Q, Act]
        keep = inside & stays.any(axis=1)
        if (keep == inside).all():
            return inside
        inside = keep


def _no_path_set(kernel: np.ndarray, target: int) -> np.ndarray:
    """States with no path to the target under any action choices."""
    n = kernel.shape[0]
    supp = (kernel > STRUCTURAL_ZERO).any(axis=1)  # [Q, Q] union over actions
    can = np.zeros(n, dtype=bool)
    can[target] = True
    frontier = [target]
    while frontier:
        q = frontier.pop()
        for p in np.nonzero(supp[:, q])[0]:
            if not can[p]:
                can[p] = True
                frontier.append(int(p))
    return ~can


def _optimize_reach(
    kernel: np.ndarray, target: int, game: ConcurrentGame, minimize: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Exact optimal reach values and a pure positional witness policy.

    Pure policy iteration can stall on probability-zero cycles (a self-loop
    tying with an exit), so states where the optimizer can force probability
    zero (minimize) or that cannot reach the target at all (maximize) are
    pinned to zero first.
    """
    n, n_act, _ = kernel.shape
    pinned = _closed_avoid_set(kernel, target) if minimize else _no_path_set(kernel, target)
    pinned[target] = False
    policy = np.zeros(n, dtype=int)
    if minimize:
        supp = kernel > STRUCTURAL_ZERO
        for q in np.nonzero(pinned)[0]:
            stays = (~supp[q] | pinned[None, :]).all(axis=1)  # [Act]
            policy[q] = int(np.nonzero(stays)[0][0])

    free = np.nonzero(~pinned & (np.arange(n) != target))[0]

    def evaluate(pol: np.ndarray) -> np.ndarray:
        # exact absorption in the policy's own chain; states the chain traps
        # away from the target get probability 0 without a singular solve
        return _absorption(_policy_chain(kernel, pol), target, game)

    x = evaluate(policy)
    for _ in range(200 * n * n_act + 200):
        q_values = kernel @ x  # [Q, Act]
        changed = False
        for q in free:
            current = q_values[q, policy[q]]
            best = q_values[q].min() if minimize else q_values[q].max()
            if (current - best if minimize else best - current) > IMPROVE_TOL:
                candidates = np.nonzero(
                    np.isclose(q_values[q], best, rtol=0.0, atol=IMPROVE_TOL / 10)
                )[0]
                policy[q] = int(candidates[0])
                changed = True
        if not changed:
            break
        x = evaluate(policy)
    return x, policy


def evaluate_against_best_b(game: ConcurrentGame, sa: PositionalStrategy) -> BestResponse:
    """Min-reachability value of the induced MDP; B minimizes, exactly."""
    mdp = induce_mdp(game, sa)
    values, policy = _optimize_reach(mdp.iota, game.target_index, game, minimize=True)
    sb = PositionalStrategy(
        "B",
        {
            q: MixedAction({game.actions_b[policy[i]]: 1.0})
            for i, q in enumerate(game.states)
        },
    )
    return BestResponse(values=StateValuation.from_vector(game, values), strategy=sb)


def evaluate_against_best_a(game: ConcurrentGame, sb: PositionalStrategy) -> BestResponse:
    """Max-reachability value of the A-side MDP induced by a fixed B strategy."""
    kernel = induce_mdp_for_a(game, sb)
    values, policy = _optimize_reach(kernel, game.target_index, game, minimize=False)
    sa = PositionalStrategy(
        "A",
        {
            q: MixedAction({game.actions_a[policy[i]]: 1.0})
            for i, q in enumerate(game.states)
        },
    )
    return BestResponse(values=StateValuation.from_vector(game, values), strategy=sa)


def optimal_b_strategy(game: ConcurrentGame, m: StateValuation) -> PositionalStrategy:
    """Column-optimal strategy of every local game under the lifted values."""
    from .fixpoint import local_matrices
    from .matrix import solve

    matrices = local_matrices(game, m.vector(game))
    choices = {}
    for i, q in enumerate(game.states):
        sol = solve(MatrixGame(matrices[i]))
        choices[q] = MixedAction.from_vector(game.actions_b, sol.col_strategy)
    return PositionalStrategy("B", choices)


def check_local_domination(
    game: ConcurrentGame, sa: PositionalStrategy, v: StateValuation, theta_eq: float = 1e-7
) -> DominationReport:
    """Per-state margin of the strategy's local value over the valuation."""
    from .fixpoint import local_matrices

    vec = v.vector(game)
    matrices = local_matrices(game, vec)
    sa_mat = sa.matrix(game)
    margins = {}
    violations = []
    for i, q in enumerate(game.states):
        val = value_of_row_strategy(MatrixGame(matrices[i]), sa_mat[i])
        margin = val - vec[i]
        margins[q] = float(margin)
        if margin < -theta_eq:
            violations.append(q)
    return DominationReport(margins=margins, violations=tuple(violations))
