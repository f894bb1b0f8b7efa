"""Game-form analysis: determinacy, the partial-valuation fixed point,
reach-maximizability w.r.t. a partial valuation, sampling falsification of
full reach-maximizability, and the three-state game embedding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded
from .matrix import (
    THETA_EQ,
    THETA_STRICT,
    MatrixGame,
    SupportPattern,
    enumerate_support_patterns,
    quick_solution,
    solve,
)
from .model import (
    ConcurrentGame,
    GameForm,
    OutcomeValuation,
    PartialValuation,
    validate_game,
)

DETERMINACY_CAP = 20
F_ALPHA_TOL = 1e-9
F_ALPHA_MAX_ITER = 10**7
_KLEENE_BUDGET = 256  # switch to bisection once plain iteration stops paying


@dataclass(frozen=True)
class DeterminacyResult:
    determined: bool
    counterexample: frozenset[str] | None  # outcome subset E witnessing failure


@dataclass(frozen=True)
class FAlphaResult:
    v_alpha: float
    induced: OutcomeValuation  # alpha completed with v_alpha on the unvalued set
    iterations: int
    converged: bool


@dataclass(frozen=True)
class RmVerdict:
    form: GameForm
    alpha: PartialValuation
    v_alpha: float
    induced: OutcomeValuation
    rm: bool
    witness: SupportPattern | None


@dataclass(frozen=True)
class FalsifyResult:
    counterexample: PartialValuation | None
    samples_checked: int

    @property
    def falsified(self) -> bool:
        return self.counterexample is not None


def is_determined(form: GameForm, cap: int = DETERMINACY_CAP) -> DeterminacyResult:
    """Check determinacy by enumerating every outcome subset E.

    Determined means: for each E, some row lies entirely inside E or some
    column entirely inside its complement.  Subsets are scanned by size then
    lexicographically; the first failure is returned.
    """
    n_out = len(form.outcomes)
    if n_out > cap:
        raise CapExceeded(f"{n_out} outcomes exceed the determinacy cap {cap}")
    table = form.table
    rows = [frozenset(table[i].tolist()) for i in range(form.row_count)]
    cols = [frozenset(table[:, j].tolist()) for j in range(form.col_count)]
    for size in range(0, n_out + 1):
        for combo in itertools.combinations(range(n_out), size):
            e = frozenset(combo)
            if any(r <= e for r in rows):
                continue
            if any(c.isdisjoint(e) for c in cols):
                continue
            return DeterminacyResult(
                determined=False,
                counterexample=frozenset(form.outcomes[i] for i in combo),
            )
    return DeterminacyResult(determined=True, counterexample=None)


def _alpha_vector(form: GameForm, alpha: PartialValuation) -> tuple[np.ndarray, np.ndarray]:
    """(defined values with zeros at E, boolean mask of E) in outcome order."""
    alpha.check_against(form)
    e_mask = np.array([o in alpha.unvalued for o in form.outcomes])
    base = np.array([alpha.defined.get(o, 0.0) for o in form.outcomes])
    return base, e_mask


def _value_at(form: GameForm, base: np.ndarray, e_mask: np.ndarray, y: float) -> float:
    vals = np.where(e_mask, y, base)
    matrix = vals[form.table]
    quick = quick_solution(matrix)
    if quick is not None:
        return quick[0]
    return solve(MatrixGame(matrix)).value


def f_alpha_lfp(
    form: GameForm,
    alpha: PartialValuation,
    tol: float = F_ALPHA_TOL,
    max_iter: int = F_ALPHA_MAX_ITER,
) -> FAlphaResult:
    """Least fixed point of y -> value of the form with E valued at y.

    Kleene iteration from 0 handles the common geometric cases; when it
    stalls, bisection takes over: the map is non-decreasing and 1-Lipschitz,
    so {y : f(y) <= y} is upward closed and its infimum is the lfp.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    base, e_mask = _alpha_vector(form, alpha)
    if not e_mask.any():
        v = _value_at(form, base, e_mask, 0.0)
        return FAlphaResult(
            v_alpha=v,
            induced=OutcomeValuation({o: float(x) for o, x in zip(form.outcomes, base)}),
            iterations=1,
            converged=True,
        )

    y = 0.0
    iterations = 0
    converged = False
    budget = min(max_iter, _KLEENE_BUDGET)
    while iterations < budget:
        iterations += 1
        nxt = _value_at(form, base, e_mask, y)
        step = nxt - y
        y = max(y, nxt)  # monotone from below; guard float noise
        if abs(step) <= tol:
            residual = abs(_value_at(form, base, e_mask, y) - y)
            converged = residual <= 10 * tol
            break

    if not converged:
        # Bisection on [y, 1]: y underestimates the lfp and f(1) <= 1, and
        # {t : f(t) <= t} is upward closed for a monotone 1-Lipschitz map,
        # so its infimum above y is exactly the least fixed point.
        lo, hi = y, 1.0
        while hi - lo > tol and iterations < max_iter:
            iterations += 1
            mid = (lo + hi) / 2.0
            if _value_at(form, base, e_mask, mid) <= mid + 1e-15:
                hi = mid
            else:
                lo = mid
        y = hi
        converged = abs(_value_at(form, base, e_mask, y) - y) <= max(10 * tol, 1e-7)

    if abs(y) <= tol and _value_at(form, base, e_mask, 0.0) <= tol:
        y = 0.0
    vals = np.where(e_mask, y, base)
    return FAlphaResult(
        v_alpha=float(y),
        induced=OutcomeValuation({o: float(x) for o, x in zip(form.outcomes, vals)}),
        iterations=iterations,
        converged=converged,
    )


def rm_wrt(
    form: GameForm,
    alpha: PartialValuation,
    tol: float = F_ALPHA_TOL,
    theta_eq: float = THETA_EQ,
    theta_strict: float = THETA_STRICT,
    cap: int = 12,
) -> RmVerdict:
    """Reach-maximizability w.r.t. one partial valuation.

    True iff the induced value is zero, or some realizable optimal pattern
    keeps, for every tight column, at least one support outcome outside the
    unvalued set.
    """
    res = f_alpha_lfp(form, alpha, tol=tol)
    if res.v_alpha <= theta_eq:
        return RmVerdict(
            form=form, alpha=alpha, v_alpha=res.v_alpha, induced=res.induced,
            rm=True, witness=None,
        )
    matrix = res.induced.vector(form)[form.table]
    patterns = enumerate_support_patterns(
        MatrixGame(matrix), theta_eq=theta_eq, theta_strict=theta_strict, cap=cap
    )
    e_idx = {form.outcome_index(o) for o in alpha.unvalued}
    for pat in patterns:
        rows = sorted(pat.row_support)
        ok = True
        for j in sorted(pat.tight_columns):
            cell_outcomes = {int(form.table[i, j]) for i in rows}
            if cell_outcomes <= e_idx:
                ok = False
                break
        if ok:
            return RmVerdict(
                form=form, alpha=alpha, v_alpha=res.v_alpha, induced=res.induced,
                rm=True, witness=pat,
            )
    return RmVerdict(
        form=form, alpha=alpha, v_alpha=res.v_alpha, induced=res.induced,
        rm=False, witness=None,
    )


def _sample_alpha(form: GameForm, unvalued: frozenset[str], rng, style: int) -> PartialValuation:
    defined_outcomes = [o for o in form.outcomes if o not in unvalued]
    if style == 0:
        values = {o: float(rng.integers(0, 9)) / 8.0 for o in defined_outcomes}
    elif style == 1:
        values = {o: float(rng.random()) for o in defined_outcomes}
    else:
        const = 1.0 if style == 2 else 0.0
        values = {o: const for o in defined_outcomes}
    return PartialValuation(defined=values, unvalued=unvalued)


def rm_falsify(form: GameForm, samples: int, seed: int) -> FalsifyResult:
    """Search for a partial valuation witnessing non-reach-maximizability.

    Samples unvalued sets uniformly over the non-empty proper subsets with
    defined values drawn from the {0, 1/8, ..., 1} grid, uniform randoms and
    the constant corners.  Finding nothing is explicitly not a proof.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_out = len(form.outcomes)
    checked = 0

    # E empty and E = O are included for completeness; neither can falsify
    # (no tight column can sit inside an empty E; with E = O the value is 0).
    for trivial in (frozenset(), frozenset(form.outcomes)):
        alpha = PartialValuation(
            defined={o: 1.0 for o in form.outcomes if o not in trivial},
            unvalued=trivial,
        )
        checked += 1
        verdict = rm_wrt(form, alpha)
        if not verdict.rm:
            return FalsifyResult(counterexample=alpha, samples_checked=checked)

    if n_out < 2:
        return FalsifyResult(counterexample=None, samples_checked=checked)

    for index in range(samples):
        rng = np.random.Generator(np.random.Philox(key=[seed, index]))
        while True:
            mask = rng.integers(0, 2, size=n_out).astype(bool)
            if mask.any() and not mask.all():
                break
        unvalued = frozenset(o for o, m in zip(form.outcomes, mask) if m)
        alpha = _sample_alpha(form, unvalued, rng, style=index % 4)
        checked += 1
        verdict = rm_wrt(form, alpha)
        if not verdict.rm:
            return FalsifyResult(counterexample=alpha, samples_checked=checked)
    return FalsifyResult(counterexample=None, samples_checked=checked)


def embed_three_state(form: GameForm, alpha: PartialValuation) -> ConcurrentGame:
    """Three-state reachability game whose main-state value is v_alpha.

    Valued outcomes become Nature states splitting between target and bin
    with the outcome's value; unvalued outcomes loop back to the main state.
    """
    alpha.check_against(form)
    states = ["q0", "top", "bot"]
    actions_a = [f"a{i + 1}" for i in range(form.row_count)]
    actions_b = [f"b{j + 1}" for j in range(form.col_count)]

    nature: dict[str, dict[str, float]] = {}
    for o in form.outcomes:
        if o in alpha.unvalued:
            continue
        p = float(alpha.defined[o])
        row: dict[str, float] = {}
        if p > 0.0:
            row["top"] = p
        if p < 1.0:
            row["bot"] = 1.0 - p
        nature[f"d_{o}"] = row
    nature["d_loop"] = {"q0": 1.0}
    nature["top_loop"] = {"top": 1.0}
    nature["bot_loop"] = {"bot": 1.0}

    def cell_name(o: str) -> str:
        return "d_loop" if o in alpha.unvalued else f"d_{o}"

    delta = {
        "q0": [
            [cell_name(form.cell(i, j)) for j in range(form.col_count)]
            for i in range(form.row_count)
        ],
        "top": [["top_loop"] * form.col_count for _ in range(form.row_count)],
        "bot": [["bot_loop"] * form.col_count for _ in range(form.row_count)],
    }
    return validate_game(
        {
            "states": states,
            "target": "top",
            "actions_a": actions_a,
            "actions_b": actions_b,
            "nature": nature,
            "delta": delta,
        }
    )
