"""Shared fixtures: the snowball game, random game sampling, exact oracles."""

from __future__ import annotations

import numpy as np
import pytest

from crgames.model import ConcurrentGame, MixedAction, PositionalStrategy, validate_game

SNOWBALL_RAW = {
    "states": ["q0", "top", "bot"],
    "target": "top",
    "actions_a": ["a1", "a2"],
    "actions_b": ["b1", "b2"],
    "nature": {
        "d_loop": {"q0": 1.0},
        "d_top": {"top": 1.0},
        "d_bot": {"bot": 1.0},
    },
    "delta": {
        "q0": [["d_loop", "d_top"], ["d_top", "d_bot"]],
        "top": [["d_top", "d_top"], ["d_top", "d_top"]],
        "bot": [["d_bot", "d_bot"], ["d_bot", "d_bot"]],
    },
}

# Same arena with the move-to-target Nature state diluted to a fair coin,
# which drops the main state's value to 1/2 (still without optimal strategies).
MODIFIED_SNOWBALL_RAW = {
    "states": ["q0", "top", "bot"],
    "target": "top",
    "actions_a": ["a1", "a2"],
    "actions_b": ["b1", "b2"],
    "nature": {
        "d_loop": {"q0": 1.0},
        "d_top": {"top": 0.5, "bot": 0.5},
        "d_bot": {"bot": 1.0},
        "d_sink": {"top": 1.0},
    },
    "delta": {
        "q0": [["d_loop", "d_top"], ["d_top", "d_bot"]],
        "top": [["d_sink", "d_sink"], ["d_sink", "d_sink"]],
        "bot": [["d_bot", "d_bot"], ["d_bot", "d_bot"]],
    },
}


@pytest.fixture
def snowball() -> ConcurrentGame:
    return validate_game(SNOWBALL_RAW)


@pytest.fixture
def modified_snowball() -> ConcurrentGame:
    return validate_game(MODIFIED_SNOWBALL_RAW)


def random_game(
    rng: np.random.Generator,
    n_states: int = 4,
    n_a: int = 2,
    n_b: int = 2,
    n_nature: int = 5,
    sink_mass: float = 0.0,
    loopiness: float = 0.25,
) -> ConcurrentGame:
    """Random arena with ``n_states`` non-target states plus the target.

    ``sink_mass`` reserves that much probability toward the target in every
    non-Dirac Nature state (guarantees geometric value-iteration convergence);
    ``loopiness`` is the chance of a Nature state being a Dirac onto a random
    non-target state (creates end components and zero-value pockets).
    """
    states = [f"s{i}" for i in range(n_states)] + ["top"]
    nature = {"d_target": {"top": 1.0}}
    for k in range(n_nature):
        if rng.random() < loopiness:
            nature[f"d{k}"] = {states[int(rng.integers(0, n_states))]: 1.0}
            continue
        size = int(rng.integers(1, min(3, len(states)) + 1))
        support = rng.choice(len(states), size=size, replace=False)
        raw = rng.random(size) + 0.05
        probs = raw / raw.sum()
        row = {}
        if sink_mass > 0.0:
            row["top"] = sink_mass
            probs = probs * (1.0 - sink_mass)
        for idx, p in zip(support, probs):
            name = states[int(idx)]
            row[name] = row.get(name, 0.0) + float(p)
        nature[f"d{k}"] = row
    nature_names = [d for d in nature if d != "d_target"]
    delta = {}
    for q in states[:-1]:
        delta[q] = [
            [str(rng.choice(nature_names)) for _ in range(n_b)] for _ in range(n_a)
        ]
    delta["top"] = [["d_target"] * n_b for _ in range(n_a)]
    return validate_game(
        {
            "states": states,
            "target": "top",
            "actions_a": [f"a{i+1}" for i in range(n_a)],
            "actions_b": [f"b{j+1}" for j in range(n_b)],
            "nature": nature,
            "delta": delta,
        }
    )


def random_mixed(rng: np.random.Generator, actions) -> MixedAction:
    raw = rng.random(len(actions)) + 1e-3
    raw /= raw.sum()
    return MixedAction({a: float(p) for a, p in zip(actions, raw)})


def random_positional(rng: np.random.Generator, game: ConcurrentGame, player: str) -> PositionalStrategy:
    actions = game.actions_a if player == "A" else game.actions_b
    return PositionalStrategy(player, {q: random_mixed(rng, actions) for q in game.states})


def chain_absorption_oracle(chain: np.ndarray, target: int) -> np.ndarray:
    """Independent absorption oracle: iterate the chain to near-fixation."""
    n = chain.shape[0]
    x = np.zeros(n)
    x[target] = 1.0
    for _ in range(200_000):
        nxt = chain @ x
        nxt[target] = 1.0
        if np.abs(nxt - x).max() < 1e-13:
            return nxt
        x = nxt
    return x


def pure_policy_chain(game: ConcurrentGame, a_policy, b_policy) -> np.ndarray:
    """Chain of a pure positional policy pair; policies are index arrays."""
    n = game.n_states
    chain = np.zeros((n, n))
    for q in range(n):
        d = game.delta[q, a_policy[q], b_policy[q]]
        chain[q] = game.dist[d]
    return chain
