"""Maximizable/sub-maximizable state classification (the double fixed point).

Existential questions about optimal local strategies are answered through
exhaustive support-pattern enumeration: whether a progressive / non-risky
optimal strategy exists at a state depends only on the pattern
(support, tight-column set), never on a particular optimal vertex.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValuesNotConverged
from .fixpoint import (
    FixpointResult,
    apply_delta_vector,
    least_fixed_point,
    local_matrices,
    zero_value_set,
)
from .matrix import (
    THETA_EQ,
    THETA_STRICT,
    MatrixGame,
    SupportPattern,
    enumerate_support_patterns,
)
from .mdp import evaluate_against_best_a, optimal_b_strategy
from .model import (
    ClassificationReport,
    ConcurrentGame,
    MixedAction,
    StateValuation,
)


@dataclass(frozen=True)
class EffQuery:
    """A per-state efficiency question with its derived Nature-state sets."""

    state: str
    good: frozenset[str]
    bad: frozenset[str]
    good_nature: frozenset[str]
    bad_nature: frozenset[str]

    @staticmethod
    def build(game: ConcurrentGame, state: str, good, bad) -> "EffQuery":
        good = frozenset(good)
        bad = frozenset(bad)
        return EffQuery(
            state=state,
            good=good,
            bad=bad,
            good_nature=_nature_reaching(game, good),
            bad_nature=_nature_reaching(game, bad),
        )


def _nature_reaching(game: ConcurrentGame, states: frozenset[str]) -> frozenset[str]:
    """Nature states whose support intersects the given state set."""
    if not states:
        return frozenset()
    mask = np.zeros(game.n_states, dtype=bool)
    for q in states:
        mask[game.state_index(q)] = True
    hits = (game.dist[:, mask] > 0.0).any(axis=1)
    return frozenset(game.nature[d] for d in np.nonzero(hits)[0])


@dataclass(frozen=True)
class RefinedValues:
    """Value vector bracketed between the Kleene iterate and a B-side bound.

    ``lower`` comes from value iteration (below the true values); ``upper``
    is the exactly-evaluated best response to a column-optimal strategy built
    from the lower vector (above the true values).  When the upper vector is
    itself a fixed point of the value operator it is adopted for
    classification, which rescues the slow O(1/n) regimes near value-1 states.
    """

    values: StateValuation
    lower: StateValuation
    upper: StateValuation
    bracket_width: float
    refined: bool


def refine_values(game: ConcurrentGame, fp: FixpointResult) -> RefinedValues:
    lower_vec = fp.values.vector(game)
    sb = optimal_b_strategy(game, fp.values)
    upper = evaluate_against_best_a(game, sb).values
    upper_vec = upper.vector(game)
    width = float(np.abs(upper_vec - lower_vec).max())
    zero = zero_value_set(game)
    candidate = np.maximum(upper_vec, lower_vec)
    candidate[game.target_index] = 1.0
    for q in zero:
        candidate[game.state_index(q)] = 0.0
    residual = float(np.abs(apply_delta_vector(game, candidate) - candidate).max())
    ok = residual <= 1e-7 and (candidate >= lower_vec - 1e-9).all()
    chosen = candidate if ok else lower_vec
    return RefinedValues(
        values=StateValuation.from_vector(game, chosen),
        lower=fp.values,
        upper=StateValuation.from_vector(game, upper_vec),
        bracket_width=width,
        refined=ok,
    )


class _PatternCache:
    """Per-state support patterns of the local games under a fixed valuation."""

    def __init__(self, game: ConcurrentGame, m_vec: np.ndarray, theta_eq, theta_strict, cap, threads=1):
        self.game = game
        self.theta_eq = theta_eq
        self.theta_strict = theta_strict
        matrices = local_matrices(game, m_vec)

        def work(i):
            return enumerate_support_patterns(
                MatrixGame(matrices[i]), theta_eq=theta_eq, theta_strict=theta_strict, cap=cap
            )

        indices = range(game.n_states)
        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, indices))
        else:
            results = [work(i) for i in indices]
        self.patterns: dict[str, list[SupportPattern]] = {
            game.states[i]: results[i] for i in indices
        }

    def efficient(self, query: EffQuery) -> list[SupportPattern]:
        game = self.game
        qi = game.state_index(query.state)
        good_d = np.zeros(len(game.nature), dtype=bool)
        for d in query.good_nature:
            good_d[game.nature_index(d)] = True
        bad_d = np.zeros(len(game.nature), dtype=bool)
        for d in query.bad_nature:
            bad_d[game.nature_index(d)] = True
        delta_q = game.delta[qi]  # [A, B]
        out = []
        for pat in self.patterns[query.state]:
            rows = sorted(pat.row_support)
            cols = sorted(pat.tight_columns)
            cells = delta_q[np.ix_(rows, cols)]
            progressive = bool(good_d[cells].any(axis=0).all())
            if not progressive:
                continue
            risky = bool(bad_d[cells].any())
            if risky:
                continue
            out.append(pat)
        return out

    def progressive(self, query: EffQuery) -> list[SupportPattern]:
        no_bad = EffQuery(
            state=query.state,
            good=query.good,
            bad=frozenset(),
            good_nature=query.good_nature,
            bad_nature=frozenset(),
        )
        return self.efficient(no_bad)


def progressive_strategies(
    game: ConcurrentGame,
    m: StateValuation,
    q: str,
    good,
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
    cap: int = 12,
) -> list[SupportPattern]:
    """Patterns of optimal local strategies keeping positive probability
    toward the good set for every tight column."""
    cache = _PatternCache(game, m.vector(game), theta_eq, theta_strict, cap)
    return cache.progressive(EffQuery.build(game, q, good, frozenset()))


def risky_strategies_excluded(
    game: ConcurrentGame,
    m: StateValuation,
    q: str,
    good,
    bad,
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
    cap: int = 12,
) -> list[SupportPattern]:
    """Progressive patterns that never leak toward the bad set (efficient)."""
    cache = _PatternCache(game, m.vector(game), theta_eq, theta_strict, cap)
    return cache.efficient(EffQuery.build(game, q, good, bad))


@dataclass(frozen=True)
class SecureResult:
    levels: tuple[frozenset[str], ...]  # growing hierarchy, level 0 = {target}
    secure: frozenset[str]  # union of levels plus the zero set
    witnesses: dict[str, SupportPattern]  # efficient pattern at first insertion
    entry_level: dict[str, int]


def _secure_states(
    game: ConcurrentGame,
    cache: _PatternCache,
    zero_set: frozenset[str],
    bad: frozenset[str],
) -> SecureResult:
    level = frozenset({game.target})
    levels = [level]
    witnesses: dict[str, SupportPattern] = {}
    entry_level: dict[str, int] = {game.target: 0}
    for round_no in range(1, game.n_states + 1):
        grown = set(level)
        for q in game.states:
            if q in level or q in bad:
                continue
            eff = cache.efficient(EffQuery.build(game, q, level, bad))
            if eff:
                grown.add(q)
                witnesses[q] = eff[0]
                entry_level[q] = round_no
        grown = frozenset(grown)
        if grown == level:
            break
        level = grown
        levels.append(level)
    secure = frozenset(level | zero_set)
    return SecureResult(
        levels=tuple(levels),
        secure=secure,
        witnesses=witnesses,
        entry_level=entry_level,
    )


def secure_states(
    game: ConcurrentGame,
    m: StateValuation,
    zero_set: frozenset[str],
    bad,
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
    cap: int = 12,
) -> SecureResult:
    """Hierarchy of secure states w.r.t. a forbidden set, plus its union."""
    cache = _PatternCache(game, m.vector(game), theta_eq, theta_strict, cap)
    return _secure_states(game, cache, zero_set, frozenset(bad))


def classify_states(
    game: ConcurrentGame,
    tol: float = 1e-6,
    max_iter: int = 10**6,
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
    cap: int = 12,
    force: bool = False,
    threads: int = 1,
) -> ClassificationReport:
    """Full double fixed point: Bad iteration outside, Sec hierarchy inside."""
    fp = least_fixed_point(game, tol=tol, max_iter=max_iter)
    if not fp.converged and not force:
        raise ValuesNotConverged(
            f"value iteration stopped at residual {fp.residual} after {fp.iterations} iterations"
        )
    refined = refine_values(game, fp)
    warnings = []
    if not refined.refined and refined.bracket_width > 10 * theta_strict:
        warnings.append(
            "value bracket width {:.3e} exceeds 10*theta_strict; "
            "classification may be unreliable near tolerance boundaries".format(
                refined.bracket_width
            )
        )
    m = refined.values
    m_vec = m.vector(game)
    zero = zero_value_set(game)
    cache = _PatternCache(game, m_vec, theta_eq, theta_strict, cap, threads=threads)

    bad: frozenset[str] = frozenset()
    bad_iterations: list[frozenset[str]] = []
    hierarchies: list[tuple[frozenset[str], ...]] = []
    last_secure: SecureResult | None = None
    for _ in range(game.n_states + 1):
        sec = _secure_states(game, cache, zero, bad)
        hierarchies.append(sec.levels)
        last_secure = sec
        new_bad = frozenset(set(game.states) - sec.secure)
        bad_iterations.append(new_bad)
        if new_bad == bad:
            break
        assert bad <= new_bad, "Bad iteration must be monotone"
        bad = new_bad
    else:
        raise AssertionError("Bad iteration failed to stabilize within |Q| rounds")

    max_states = frozenset(set(game.states) - bad)
    witnesses: dict[str, MixedAction] = {}
    matrices = local_matrices(game, m_vec)
    from .matrix import solve as _solve

    for q in game.states:
        if q in last_secure.witnesses:
            witnesses[q] = MixedAction.from_vector(
                game.actions_a, last_secure.witnesses[q].witness
            )
        elif q == game.target or q in zero:
            witnesses[q] = MixedAction.uniform(game.actions_a)
        else:
            sol = _solve(MatrixGame(matrices[game.state_index(q)]))
            witnesses[q] = MixedAction.from_vector(game.actions_a, sol.row_strategy)

    return ClassificationReport(
        values=m,
        zero_set=zero,
        sec_hierarchy=tuple(hierarchies),
        bad_iterations=tuple(bad_iterations),
        max_states=max_states,
        submax_states=bad,
        witnesses=witnesses,
        tolerances={
            "tol": tol,
            "theta_eq": theta_eq,
            "theta_strict": theta_strict,
        },
        warnings=tuple(warnings),
        value_bracket_width=refined.bracket_width,
    )
