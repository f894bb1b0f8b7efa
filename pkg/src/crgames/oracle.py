"""Independent verification machinery: Monte-Carlo simulation, brute-force
strategy grids, and the finite-horizon strategy chain.

Kept apart from the main pipeline so the solver modules never depend on it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CapExceeded
from .fixpoint import apply_delta_vector, local_matrices
from .matrix import MatrixGame, solve
from .mdp import chain_matrix, evaluate_against_best_b
from .model import ConcurrentGame, MixedAction, PositionalStrategy, StateValuation

# A history strategy maps the visited state sequence to a mixed action.
HistoryStrategy = Callable[[tuple[str, ...]], MixedAction]


@dataclass(frozen=True)
class SimulationConfig:
    runs: int
    horizon: int
    seed: int

    def __post_init__(self):
        if self.runs < 1 or self.horizon < 1:
            raise ValueError("runs and horizon must be >= 1")


@dataclass(frozen=True)
class SimulationEstimate:
    p_hat: float
    stderr: float
    runs: int


def _positional(strategy) -> bool:
    return isinstance(strategy, PositionalStrategy)


def simulate(
    game: ConcurrentGame,
    strat_a,
    strat_b,
    start: str,
    cfg: SimulationConfig,
) -> SimulationEstimate:
    """Unbiased estimate of the horizon-bounded reach probability.

    Run i draws its randomness from row i of a counter-based stream keyed by
    the seed, so results are reproducible and order-independent across runs.
    Strategies are positional or history callbacks.
    """
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    uniforms = rng.random((cfg.runs, cfg.horizon))
    target = game.target_index
    start_idx = game.state_index(start)

    if _positional(strat_a) and _positional(strat_b):
        chain = chain_matrix(game, strat_a, strat_b)
        cum = np.cumsum(chain, axis=1)
        cum[:, -1] = 1.0
        state = np.full(cfg.runs, start_idx, dtype=int)
        hit = state == target
        for step in range(cfg.horizon):
            u = uniforms[:, step]
            state = (cum[state] > u[:, None]).argmax(axis=1)
            hit |= state == target
        p_hat = float(hit.mean())
    else:
        a_call = _as_callback(game, strat_a, "A")
        b_call = _as_callback(game, strat_b, "B")
        cells = game.dist[game.delta]  # [Q, A, B, Q]
        hits = 0
        rng_actions = np.random.Generator(np.random.Philox(key=[cfg.seed, 1]))
        extra = rng_actions.random((cfg.runs, cfg.horizon, 2))
        for run in range(cfg.runs):
            state = start_idx
            history = (game.states[state],)
            reached = state == target
            for step in range(cfg.horizon):
                if reached:
                    break
                pa = a_call(history).vector(game.actions_a)
                pb = b_call(history).vector(game.actions_b)
                a = int(np.searchsorted(np.cumsum(pa), extra[run, step, 0] * pa.sum()))
                b = int(np.searchsorted(np.cumsum(pb), extra[run, step, 1] * pb.sum()))
                a = min(a, len(game.actions_a) - 1)
                b = min(b, len(game.actions_b) - 1)
                probs = cells[state, a, b]
                state = int(np.searchsorted(np.cumsum(probs), uniforms[run, step] * probs.sum()))
                state = min(state, game.n_states - 1)
                history = history + (game.states[state],)
                reached = reached or state == target
            hits += int(reached)
        p_hat = hits / cfg.runs

    stderr = float(np.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / cfg.runs))
    return SimulationEstimate(p_hat=p_hat, stderr=stderr, runs=cfg.runs)


def _as_callback(game: ConcurrentGame, strategy, player: str) -> HistoryStrategy:
    if _positional(strategy):
        choices = strategy.choices
        return lambda history: choices[history[-1]]
    return strategy


def grid_best_positional_a(
    game: ConcurrentGame, step: float, cap: int = 200_000
) -> StateValuation:
    """Componentwise best exact value over a grid of positional strategies.

    Requires two row actions (one free parameter per state).  States whose
    rows induce identical transition rows are fixed to the first action.
    A lower bound on the supremum over positional strategies.
    """
    if len(game.actions_a) != 2:
        raise CapExceeded("strategy grid requires exactly two row actions")
    cells = game.dist[game.delta]  # [Q, A, B, Q]
    free_states = []
    for qi in range(game.n_states):
        if qi == game.target_index:
            continue
        if not np.allclose(cells[qi, 0], cells[qi, 1], atol=1e-12):
            free_states.append(qi)
    points = np.arange(0.0, 1.0 + step / 2, step)
    total = len(points) ** len(free_states)
    if total > cap:
        raise CapExceeded(f"{total} grid strategies exceed the cap {cap}")

    best = np.zeros(game.n_states)
    base = np.zeros((game.n_states, 2))
    base[:, 0] = 1.0
    for combo in itertools.product(points, repeat=len(free_states)):
        mat = base.copy()
        for qi, p in zip(free_states, combo):
            mat[qi] = (p, 1.0 - p)
        sa = PositionalStrategy.from_matrix(game, "A", mat)
        vals = evaluate_against_best_b(game, sa).values.vector(game)
        best = np.maximum(best, vals)
    return StateValuation.from_vector(game, best)


@dataclass(frozen=True)
class KleeneChain:
    """Finite-horizon strategy family: level k is optimal for the k-step
    iterate, and the assembled strategy plays level n-j at step j."""

    levels: tuple[PositionalStrategy, ...]  # index k in 0..n
    guarantee: StateValuation  # the n-step iterate v_n
    iterates: tuple[np.ndarray, ...]

    @property
    def horizon(self) -> int:
        return len(self.levels) - 1

    def as_callback(self) -> HistoryStrategy:
        levels = self.levels
        n = self.horizon

        def play(history: tuple[str, ...]) -> MixedAction:
            step = len(history) - 1
            level = max(n - step, 0)
            return levels[level].choices[history[-1]]

        return play


def kleene_strategy_chain(game: ConcurrentGame, n: int) -> KleeneChain:
    """The strategy family tracking the Kleene iterates from below."""
    if n < 0:
        raise ValueError("n must be >= 0")
    v = np.zeros(game.n_states)
    v[game.target_index] = 1.0
    iterates = [v.copy()]
    levels = [PositionalStrategy.uniform(game, "A")]  # level 0 is arbitrary
    for _ in range(n):
        matrices = local_matrices(game, v)
        choices = {}
        for qi, q in enumerate(game.states):
            sol = solve(MatrixGame(matrices[qi]))
            choices[q] = MixedAction.from_vector(game.actions_a, sol.row_strategy)
        levels.append(PositionalStrategy("A", choices))
        v = apply_delta_vector(game, v)
        iterates.append(v.copy())
    return KleeneChain(
        levels=tuple(levels),
        guarantee=StateValuation.from_vector(game, v),
        iterates=tuple(iterates),
    )


def adversarial_chain_value(game: ConcurrentGame, chain: KleeneChain) -> np.ndarray:
    """Worst-case n-step reach probability of the chain strategy, by exact
    backward induction over the opponent's pure replies."""
    cells = game.dist[game.delta]  # [Q, A, B, Q]
    worst = np.zeros(game.n_states)
    worst[game.target_index] = 1.0
    for k in range(1, chain.horizon + 1):
        sa_mat = chain.levels[k].matrix(game)
        nxt = np.einsum("qa,qabs,s->qb", sa_mat, cells, worst)  # [Q, B]
        worst = nxt.min(axis=1)
        worst[game.target_index] = 1.0
    return worst
