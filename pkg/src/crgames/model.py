"""Domain types for games, game forms, valuations and strategies.

States, actions and Nature states are addressed by string identifiers in the
file format and public API; dense integer indices are used internally.  All
types are immutable after validation and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import GameValidationError, Violation

DIST_SUM_TOL = 1e-9
PROB_SUM_TOL = 1e-9


def parse_probability(raw) -> float:
    """Accept a decimal number or an exact fraction string such as "3/4"."""
    if isinstance(raw, str):
        return float(Fraction(raw))
    return float(raw)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Game forms and valuations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameForm:
    """A two-dimensional table of abstract outcomes.

    ``table[i][j]`` is the index into ``outcomes`` selected when the row
    player picks row i and the column player picks column j.
    """

    outcomes: tuple[str, ...]
    table: np.ndarray  # int array [rows, cols] of outcome indices

    def __post_init__(self):
        table = np.asarray(self.table, dtype=int)
        object.__setattr__(self, "table", _readonly(table))
        if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 1:
            raise ValueError("game form table must be a non-empty 2-D matrix")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValueError("duplicate outcome identifiers")
        used = set(table.ravel().tolist())
        if not used <= set(range(len(self.outcomes))):
            raise ValueError("table cell references an unknown outcome")
        if used != set(range(len(self.outcomes))):
            missing = [o for i, o in enumerate(self.outcomes) if i not in used]
            raise ValueError(f"outcomes never used in the table: {missing}")

    @property
    def row_count(self) -> int:
        return self.table.shape[0]

    @property
    def col_count(self) -> int:
        return self.table.shape[1]

    def outcome_index(self, outcome: str) -> int:
        return self.outcomes.index(outcome)

    def cell(self, row: int, col: int) -> str:
        return self.outcomes[self.table[row, col]]

    @staticmethod
    def from_names(table: Sequence[Sequence[str]]) -> "GameForm":
        """Build a form from a matrix of outcome names (first-appearance order)."""
        outcomes: list[str] = []
        for row in table:
            for name in row:
                if name not in outcomes:
                    outcomes.append(name)
        index = {name: i for i, name in enumerate(outcomes)}
        arr = np.array([[index[name] for name in row] for row in table], dtype=int)
        return GameForm(outcomes=tuple(outcomes), table=arr)


@dataclass(frozen=True)
class OutcomeValuation:
    """Map outcome -> value in [0, 1]."""

    values: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))
        for name, v in self.values.items():
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"valuation of {name!r} outside [0,1]: {v}")

    def vector(self, form: GameForm) -> np.ndarray:
        if set(self.values) != set(form.outcomes):
            raise ValueError("valuation domain does not match the form's outcomes")
        return np.array([min(1.0, max(0.0, self.values[o])) for o in form.outcomes])


@dataclass(frozen=True)
class PartialValuation:
    """Valuation defined on all outcomes except the unvalued subset E."""

    defined: Mapping[str, float]
    unvalued: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "defined", dict(self.defined))
        object.__setattr__(self, "unvalued", frozenset(self.unvalued))
        if set(self.defined) & self.unvalued:
            raise ValueError("defined domain and unvalued set must be disjoint")
        for name, v in self.defined.items():
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"valuation of {name!r} outside [0,1]: {v}")

    def check_against(self, form: GameForm) -> None:
        if set(self.defined) | self.unvalued != set(form.outcomes):
            raise ValueError("partial valuation does not partition the outcome set")

    def complete(self, fill: float) -> OutcomeValuation:
        """Total valuation assigning ``fill`` to every unvalued outcome."""
        out = dict(self.defined)
        for name in self.unvalued:
            out[name] = fill
        return OutcomeValuation(out)


# ---------------------------------------------------------------------------
# Concurrent games
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConcurrentGame:
    """Finite concurrent stochastic arena with a self-looping target sink.

    ``delta[q, i, j]`` is the Nature-state index reached from state q when the
    row player plays action i and the column player action j;
    ``dist[d, q]`` is the probability that Nature state d moves to state q.
    """

    states: tuple[str, ...]
    actions_a: tuple[str, ...]
    actions_b: tuple[str, ...]
    nature: tuple[str, ...]
    target: str
    delta: np.ndarray  # int [Q, A, B]
    dist: np.ndarray  # float [D, Q]

    def __post_init__(self):
        object.__setattr__(self, "delta", _readonly(np.asarray(self.delta, dtype=int)))
        object.__setattr__(self, "dist", _readonly(np.asarray(self.dist, dtype=float)))
        object.__setattr__(self, "_state_index", {s: i for i, s in enumerate(self.states)})
        object.__setattr__(self, "_nature_index", {d: i for i, d in enumerate(self.nature)})

    # Index helpers -----------------------------------------------------
    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def target_index(self) -> int:
        return self._state_index[self.target]

    def state_index(self, name: str) -> int:
        return self._state_index[name]

    def nature_index(self, name: str) -> int:
        return self._nature_index[name]

    def support(self, nature_state: int) -> np.ndarray:
        """State indices in the support of a Nature state's distribution."""
        return np.nonzero(self.dist[nature_state] > 0.0)[0]


@dataclass(frozen=True)
class StateValuation:
    """Map state -> value in [0, 1]."""

    values: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))
        for name, v in self.values.items():
            if not -1e-9 <= v <= 1 + 1e-9:
                raise ValueError(f"value of state {name!r} outside [0,1]: {v}")

    def __getitem__(self, state: str) -> float:
        return self.values[state]

    def vector(self, game: ConcurrentGame) -> np.ndarray:
        if set(self.values) != set(game.states):
            raise ValueError("valuation domain does not match the game's states")
        return np.array([min(1.0, max(0.0, self.values[s])) for s in game.states])

    @staticmethod
    def from_vector(game: ConcurrentGame, vec: np.ndarray) -> "StateValuation":
        return StateValuation({s: float(vec[i]) for i, s in enumerate(game.states)})


@dataclass(frozen=True)
class NatureValuation:
    """Map Nature state -> value in [0, 1]."""

    values: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def __getitem__(self, nature_state: str) -> float:
        return self.values[nature_state]

    def vector(self, game: ConcurrentGame) -> np.ndarray:
        return np.array([self.values[d] for d in game.nature])


@dataclass(frozen=True)
class MixedAction:
    """Probability distribution over one player's global action set."""

    probs: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "probs", dict(self.probs))
        total = sum(self.probs.values())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"mixed action sums to {total}, not 1")
        if not any(p > 0 for p in self.probs.values()):
            raise ValueError("mixed action has empty support")
        for a, p in self.probs.items():
            if p < -1e-12:
                raise ValueError(f"negative probability for action {a!r}")

    def vector(self, actions: Sequence[str]) -> np.ndarray:
        return np.array([max(0.0, self.probs.get(a, 0.0)) for a in actions])

    @staticmethod
    def from_vector(actions: Sequence[str], vec: np.ndarray) -> "MixedAction":
        vec = np.maximum(np.asarray(vec, dtype=float), 0.0)
        vec = vec / vec.sum()
        return MixedAction({a: float(vec[i]) for i, a in enumerate(actions)})

    @staticmethod
    def uniform(actions: Sequence[str]) -> "MixedAction":
        p = 1.0 / len(actions)
        return MixedAction({a: p for a in actions})


@dataclass(frozen=True)
class PositionalStrategy:
    """Per-state mixed action for one player ("A" rows or "B" columns)."""

    player: str
    choices: Mapping[str, MixedAction]

    def __post_init__(self):
        if self.player not in ("A", "B"):
            raise ValueError("player must be 'A' or 'B'")
        object.__setattr__(self, "choices", dict(self.choices))

    def matrix(self, game: ConcurrentGame) -> np.ndarray:
        """Dense [Q, actions] probability matrix in the game's ordering."""
        actions = game.actions_a if self.player == "A" else game.actions_b
        if set(self.choices) != set(game.states):
            raise ValueError("strategy domain does not match the game's states")
        return np.array([self.choices[q].vector(actions) for q in game.states])

    @staticmethod
    def from_matrix(game: ConcurrentGame, player: str, mat: np.ndarray) -> "PositionalStrategy":
        actions = game.actions_a if player == "A" else game.actions_b
        return PositionalStrategy(
            player,
            {q: MixedAction.from_vector(actions, mat[i]) for i, q in enumerate(game.states)},
        )

    @staticmethod
    def uniform(game: ConcurrentGame, player: str) -> "PositionalStrategy":
        actions = game.actions_a if player == "A" else game.actions_b
        ma = MixedAction.uniform(actions)
        return PositionalStrategy(player, {q: ma for q in game.states})


@dataclass(frozen=True)
class ClassificationReport:
    """Outcome of the double fixed point: MaxQ/SubMaxQ with diagnostics."""

    values: StateValuation
    zero_set: frozenset[str]
    sec_hierarchy: tuple[tuple[frozenset[str], ...], ...]  # per Bad iteration
    bad_iterations: tuple[frozenset[str], ...]
    max_states: frozenset[str]
    submax_states: frozenset[str]
    witnesses: Mapping[str, MixedAction]
    tolerances: Mapping[str, float]
    warnings: tuple[str, ...] = ()
    value_bracket_width: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "witnesses", dict(self.witnesses))
        object.__setattr__(self, "tolerances", dict(self.tolerances))


# ---------------------------------------------------------------------------
# Validation and the canonical file format
# ---------------------------------------------------------------------------


def collect_violations(raw: Mapping) -> list[Violation]:
    """Check a parsed game description; returns all invariant violations."""
    violations: list[Violation] = []
    states = list(raw.get("states", []))
    actions_a = list(raw.get("actions_a", []))
    actions_b = list(raw.get("actions_b", []))
    nature = raw.get("nature", {})
    delta = raw.get("delta", {})
    target = raw.get("target")

    state_set = set(states)
    if target not in state_set:
        violations.append(
            Violation("UnknownIdentifier", str(target), "target is not a declared state")
        )

    for d, row in nature.items():
        total = 0.0
        for q, p in row.items():
            if q not in state_set:
                violations.append(
                    Violation("UnknownIdentifier", f"{d}->{q}", "distribution names unknown state")
                )
                continue
            try:
                total += parse_probability(p)
            except (ValueError, ZeroDivisionError):
                violations.append(
                    Violation("DistributionNotNormalized", d, f"unparseable probability {p!r}")
                )
        if abs(total - 1.0) > DIST_SUM_TOL:
            violations.append(
                Violation("DistributionNotNormalized", d, f"distribution sums to {total}")
            )

    for q in states:
        if q not in delta:
            violations.append(Violation("UnknownIdentifier", q, "state has no delta row"))
            continue
        rows = delta[q]
        if len(rows) != len(actions_a) or any(len(r) != len(actions_b) for r in rows):
            violations.append(
                Violation("UnknownIdentifier", q, "delta table shape does not match action sets")
            )
            continue
        for row in rows:
            for d in row:
                if d not in nature:
                    violations.append(
                        Violation("UnknownIdentifier", d, f"delta at {q} names unknown Nature state")
                    )
    for q in delta:
        if q not in state_set:
            violations.append(Violation("UnknownIdentifier", q, "delta row for unknown state"))

    # Sink condition: every cell of the target row must be a Dirac self-loop.
    if target in state_set and target in delta and not any(
        v.code == "UnknownIdentifier" and v.entity != str(target) for v in violations
    ):
        for row in delta.get(target, []):
            for d in row:
                if d not in nature:
                    continue
                supp = {q for q, p in nature[d].items() if parse_probability(p) > 0.0}
                if supp != {target}:
                    violations.append(
                        Violation(
                            "TargetNotSink",
                            target,
                            f"target transition {d} has support {sorted(supp)}",
                        )
                    )
    return violations


def validate_game(raw: Mapping) -> ConcurrentGame:
    """Build a validated game from a parsed description; raises on violations."""
    violations = collect_violations(raw)
    if violations:
        raise GameValidationError(violations)

    states = tuple(raw["states"])
    actions_a = tuple(raw["actions_a"])
    actions_b = tuple(raw["actions_b"])
    nature_names = tuple(raw["nature"].keys())
    nature_index = {d: i for i, d in enumerate(nature_names)}
    state_index = {s: i for i, s in enumerate(states)}

    dist = np.zeros((len(nature_names), len(states)))
    for d, row in raw["nature"].items():
        for q, p in row.items():
            dist[nature_index[d], state_index[q]] = parse_probability(p)

    delta = np.zeros((len(states), len(actions_a), len(actions_b)), dtype=int)
    for q, rows in raw["delta"].items():
        for i, row in enumerate(rows):
            for j, d in enumerate(row):
                delta[state_index[q], i, j] = nature_index[d]

    return ConcurrentGame(
        states=states,
        actions_a=actions_a,
        actions_b=actions_b,
        nature=nature_names,
        target=raw["target"],
        delta=delta,
        dist=dist,
    )


def game_to_dict(game: ConcurrentGame) -> dict:
    """Inverse of validate_game, emitting the canonical JSON structure."""
    nature = {}
    for i, d in enumerate(game.nature):
        row = {game.states[q]: float(game.dist[i, q]) for q in np.nonzero(game.dist[i] > 0.0)[0]}
        nature[d] = row
    delta = {
        q: [[game.nature[game.delta[qi, i, j]] for j in range(len(game.actions_b))]
            for i in range(len(game.actions_a))]
        for qi, q in enumerate(game.states)
    }
    return {
        "states": list(game.states),
        "target": game.target,
        "actions_a": list(game.actions_a),
        "actions_b": list(game.actions_b),
        "nature": nature,
        "delta": delta,
    }


def load_game(path) -> ConcurrentGame:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_game(json.load(fh))


def load_game_form(path) -> GameForm:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    outcomes = tuple(raw["outcomes"])
    index = {o: i for i, o in enumerate(outcomes)}
    table = np.array([[index[o] for o in row] for row in raw["table"]], dtype=int)
    return GameForm(outcomes=outcomes, table=table)


def load_strategy(path) -> PositionalStrategy:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    choices = {
        q: MixedAction({a: parse_probability(p) for a, p in probs.items()})
        for q, probs in raw["choices"].items()
    }
    return PositionalStrategy(player=raw["player"], choices=choices)


def strategy_to_dict(strategy: PositionalStrategy) -> dict:
    return {
        "player": strategy.player,
        "choices": {
            q: {a: float(p) for a, p in ma.probs.items() if p > 0.0}
            for q, ma in strategy.choices.items()
        },
    }


def load_alpha(path) -> PartialValuation:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    defined = {o: parse_probability(v) for o, v in raw.get("defined", {}).items()}
    return PartialValuation(defined=defined, unvalued=frozenset(raw.get("unvalued", [])))


# ---------------------------------------------------------------------------
# Local interactions and transition probabilities
# ---------------------------------------------------------------------------


def local_interaction(game: ConcurrentGame, q: str) -> GameForm:
    """Game form at q: outcomes are the Nature states reachable from q."""
    qi = game.state_index(q)
    cells = game.delta[qi]
    seen: list[int] = []
    for d in cells.ravel().tolist():
        if d not in seen:
            seen.append(d)
    remap = {d: i for i, d in enumerate(seen)}
    table = np.vectorize(remap.get)(cells)
    return GameForm(outcomes=tuple(game.nature[d] for d in seen), table=table)


def transition_prob(
    game: ConcurrentGame, q: str, q2: str, sigma_a: MixedAction, sigma_b: MixedAction
) -> float:
    """Probability of moving from q to q2 under the two local strategies."""
    qi, q2i = game.state_index(q), game.state_index(q2)
    sa = sigma_a.vector(game.actions_a)
    sb = sigma_b.vector(game.actions_b)
    cell_probs = game.dist[game.delta[qi], q2i]  # [A, B]
    return float(sa @ cell_probs @ sb)
