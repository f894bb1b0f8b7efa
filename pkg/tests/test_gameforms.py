"""Determinacy, the partial-valuation fixed point, RM checks, the embedding."""

import itertools

import numpy as np
import pytest

from crgames.classify import classify_states
from crgames.errors import CapExceeded
from crgames.fixpoint import least_fixed_point
from crgames.gameforms import (
    embed_three_state,
    f_alpha_lfp,
    is_determined,
    rm_falsify,
    rm_wrt,
)
from crgames.model import GameForm, PartialValuation, collect_violations, game_to_dict

FIG2 = GameForm.from_names([["x", "y"], ["y", "z"]])
MATCHING_PENNIES = GameForm.from_names([["x", "y"], ["y", "x"]])


def check_determinacy_by_hand(form: GameForm, e: frozenset[str]) -> bool:
    """Independent determinacy condition for a single outcome subset."""
    rows = [
        {form.cell(i, j) for j in range(form.col_count)} for i in range(form.row_count)
    ]
    cols = [
        {form.cell(i, j) for i in range(form.row_count)} for j in range(form.col_count)
    ]
    return any(r <= e for r in rows) or any(not (c & e) for c in cols)


def test_single_line_forms_are_determined():
    rng = np.random.default_rng(131)
    for trial in range(10):
        n = int(rng.integers(2, 6))
        names = [f"o{i}" for i in range(n)]
        column = GameForm.from_names([[o] for o in names])
        row = GameForm.from_names([names])
        assert is_determined(column).determined
        assert is_determined(row).determined


def test_matching_pennies_not_determined():
    res = is_determined(MATCHING_PENNIES)
    assert not res.determined
    assert res.counterexample is not None
    assert not check_determinacy_by_hand(MATCHING_PENNIES, res.counterexample)


def test_fig2_not_determined_with_verified_counterexample():
    res = is_determined(FIG2)
    assert not res.determined
    assert not check_determinacy_by_hand(FIG2, res.counterexample)
    # the subset keeping only the shared outcome valued also fails
    assert not check_determinacy_by_hand(FIG2, frozenset({"x", "z"}))


def test_determinacy_verdict_matches_full_hand_check():
    rng = np.random.default_rng(137)
    for _ in range(15):
        rows, cols = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        n_out = int(rng.integers(1, rows * cols + 1))
        names = [f"o{i}" for i in range(n_out)]
        table = [[names[int(rng.integers(0, n_out))] for _ in range(cols)] for _ in range(rows)]
        for o in names:  # keep every outcome used
            if not any(o in r for r in table):
                table[int(rng.integers(0, rows))][int(rng.integers(0, cols))] = o
        used = {o for r in table for o in r}
        table[0][0] = table[0][0] if used == set(names) else table[0][0]
        try:
            form = GameForm.from_names(table)
        except ValueError:
            continue
        res = is_determined(form)
        expected = all(
            check_determinacy_by_hand(form, frozenset(combo))
            for size in range(len(form.outcomes) + 1)
            for combo in itertools.combinations(form.outcomes, size)
        )
        assert res.determined == expected


def test_determinacy_cap():
    names = [f"o{i}" for i in range(21)]
    form = GameForm.from_names([names])
    with pytest.raises(CapExceeded):
        is_determined(form)


def test_f_alpha_snowball_iterates():
    alpha = PartialValuation(defined={"y": 1.0, "z": 0.0}, unvalued=frozenset({"x"}))
    res = f_alpha_lfp(FIG2, alpha)
    assert res.v_alpha == pytest.approx(1.0, abs=1e-7)
    assert res.induced.values["y"] == 1.0
    assert res.induced.values["z"] == 0.0


def test_f_alpha_total_valuation_shortcut():
    alpha = PartialValuation(defined={"x": 0.4, "y": 0.9, "z": 0.1}, unvalued=frozenset())
    res = f_alpha_lfp(FIG2, alpha)
    # plain matrix value of [[.4,.9],[.9,.1]]
    assert res.v_alpha == pytest.approx((0.4 * 0.1 - 0.81) / (0.5 - 0.9 - 0.9), abs=1e-9)
    assert res.iterations == 1


def test_f_alpha_determined_forms_need_one_step():
    rng = np.random.default_rng(139)
    for _ in range(20):
        n = int(rng.integers(2, 5))
        names = [f"o{i}" for i in range(n)]
        form = GameForm.from_names([[o] for o in names])  # single column
        e_size = int(rng.integers(1, n))
        unvalued = frozenset(rng.choice(names, size=e_size, replace=False).tolist())
        alpha = PartialValuation(
            defined={o: float(rng.random()) for o in names if o not in unvalued},
            unvalued=unvalued,
        )
        res = f_alpha_lfp(form, alpha)
        base, e_mask = (
            np.array([alpha.defined.get(o, 0.0) for o in form.outcomes]),
            np.array([o in unvalued for o in form.outcomes]),
        )
        f0 = np.where(e_mask, 0.0, base)[form.table].max()  # single column: max row
        assert res.v_alpha == pytest.approx(float(f0), abs=1e-6)


def test_f_alpha_monotone_in_alpha():
    rng = np.random.default_rng(149)
    for _ in range(15):
        unvalued = frozenset({"x"})
        lo_y, lo_z = rng.random(), rng.random()
        hi_y = min(1.0, lo_y + rng.random() * 0.3)
        hi_z = min(1.0, lo_z + rng.random() * 0.3)
        lo = f_alpha_lfp(FIG2, PartialValuation({"y": lo_y, "z": lo_z}, unvalued))
        hi = f_alpha_lfp(FIG2, PartialValuation({"y": hi_y, "z": hi_z}, unvalued))
        assert lo.v_alpha <= hi.v_alpha + 1e-7


def test_rm_fig2_snowball_alpha_is_false():
    alpha = PartialValuation(defined={"y": 1.0, "z": 0.0}, unvalued=frozenset({"x"}))
    verdict = rm_wrt(FIG2, alpha)
    assert not verdict.rm
    assert verdict.v_alpha == pytest.approx(1.0, abs=1e-6)


def test_rm_true_when_value_zero():
    alpha = PartialValuation(defined={"y": 0.0, "z": 0.0}, unvalued=frozenset({"x"}))
    verdict = rm_wrt(FIG2, alpha)
    assert verdict.rm
    assert verdict.v_alpha <= 1e-7


def test_rm_true_on_determined_forms():
    rng = np.random.default_rng(151)
    for _ in range(20):
        n = int(rng.integers(2, 5))
        names = [f"o{i}" for i in range(n)]
        form = GameForm.from_names([[o] for o in names])
        e_size = int(rng.integers(0, n + 1))
        unvalued = frozenset(rng.choice(names, size=e_size, replace=False).tolist())
        alpha = PartialValuation(
            defined={o: float(rng.integers(0, 9)) / 8.0 for o in names if o not in unvalued},
            unvalued=unvalued,
        )
        assert rm_wrt(form, alpha).rm


def test_rm_falsify_finds_fig2_counterexample():
    res = rm_falsify(FIG2, samples=200, seed=7)
    assert res.falsified
    # the returned counterexample independently fails the RM check
    assert not rm_wrt(FIG2, res.counterexample).rm


def test_rm_falsify_single_column_survives():
    form = GameForm.from_names([["x"], ["y"], ["z"]])
    res = rm_falsify(form, samples=200, seed=7)
    assert not res.falsified


def test_rm_falsify_single_outcome_vacuous():
    form = GameForm.from_names([["x", "x"]])
    res = rm_falsify(form, samples=50, seed=1)
    assert not res.falsified
    assert res.samples_checked == 2  # only the trivial subsets exist


def test_embed_fig2_reproduces_snowball(snowball):
    alpha = PartialValuation(defined={"y": 1.0, "z": 0.0}, unvalued=frozenset({"x"}))
    game = embed_three_state(FIG2, alpha)
    assert collect_violations(game_to_dict(game)) == []
    assert game.states == ("q0", "top", "bot")
    # same arena as the snowball up to Nature-state naming
    at = {
        (i, j): game.nature[game.delta[0, i, j]]
        for i in range(2)
        for j in range(2)
    }
    assert at == {(0, 0): "d_loop", (0, 1): "d_y", (1, 0): "d_y", (1, 1): "d_z"}
    d_y = game.nature_index("d_y")
    assert game.dist[d_y, game.state_index("top")] == pytest.approx(1.0)
    d_z = game.nature_index("d_z")
    assert game.dist[d_z, game.state_index("bot")] == pytest.approx(1.0)


def test_embed_all_unvalued_gives_zero_value():
    alpha = PartialValuation(defined={}, unvalued=frozenset({"x", "y", "z"}))
    game = embed_three_state(FIG2, alpha)
    fp = least_fixed_point(game)
    assert fp.values["q0"] == 0.0


def random_form(rng, max_rows=3, max_cols=3) -> GameForm:
    rows = int(rng.integers(1, max_rows + 1))
    cols = int(rng.integers(1, max_cols + 1))
    n_out = int(rng.integers(1, rows * cols + 1))
    names = [f"o{i}" for i in range(n_out)]
    while True:
        table = [[names[int(rng.integers(0, n_out))] for _ in range(cols)] for _ in range(rows)]
        if {o for r in table for o in r} == set(names):
            return GameForm.from_names(table)


def random_alpha(rng, form: GameForm, allow_trivial=False) -> PartialValuation:
    n = len(form.outcomes)
    while True:
        mask = rng.integers(0, 2, size=n).astype(bool)
        if allow_trivial or (mask.any() and not mask.all()):
            break
    unvalued = frozenset(o for o, m in zip(form.outcomes, mask) if m)
    # corner-biased: the interesting failures live at extreme valuations
    defined = {
        o: float(rng.choice([0.0, 1.0, float(rng.integers(0, 9)) / 8.0]))
        for o in form.outcomes
        if o not in unvalued
    }
    return PartialValuation(defined=defined, unvalued=unvalued)


def handcrafted_rm_instances() -> list[tuple[GameForm, PartialValuation, bool]]:
    """Known (form, alpha, rm) triples covering both verdicts."""
    fig2_bad = PartialValuation({"y": 1.0, "z": 0.0}, frozenset({"x"}))
    fig2_half = PartialValuation({"y": 0.5, "z": 0.0}, frozenset({"x"}))
    fig2_zero = PartialValuation({"y": 0.0, "z": 0.0}, frozenset({"x"}))
    # matching pennies is not determined yet reach-maximizable: its induced
    # local game is constant at the fixed point and uniform play qualifies
    mp_ones = PartialValuation({"y": 1.0}, frozenset({"x"}))
    single = GameForm.from_names([["x"], ["y"]])
    single_alpha = PartialValuation({"y": 0.75}, frozenset({"x"}))
    return [
        (FIG2, fig2_bad, False),
        (FIG2, fig2_half, False),
        (FIG2, fig2_zero, True),
        (MATCHING_PENNIES, mp_ones, True),
        (single, single_alpha, True),
    ]


def test_embedded_value_matches_v_alpha():
    rng = np.random.default_rng(157)
    done = 0
    while done < 15:
        form = random_form(rng)
        if len(form.outcomes) < 2:
            continue
        alpha = random_alpha(rng, form)
        fa = f_alpha_lfp(form, alpha)
        if fa.v_alpha > 0.875:  # near-tangent regimes need the refined route
            continue
        game = embed_three_state(form, alpha)
        fp = least_fixed_point(game, tol=1e-8)
        assert fp.values["q0"] == pytest.approx(fa.v_alpha, abs=1e-5)
        done += 1


def test_handcrafted_rm_verdicts():
    for form, alpha, expected in handcrafted_rm_instances():
        assert rm_wrt(form, alpha).rm == expected


def test_embedding_equivalence_with_classification():
    # maximizability of the embedded main state agrees with the RM verdict
    rng = np.random.default_rng(163)
    pending = [(f, a) for f, a, _ in handcrafted_rm_instances()]
    agreed = 0
    attempts = 0
    while agreed < 25 and attempts < 400:
        attempts += 1
        if pending:
            form, alpha = pending.pop()
        else:
            form = random_form(rng)
            if len(form.outcomes) < 2:
                continue
            alpha = random_alpha(rng, form)
        verdict = rm_wrt(form, alpha)
        if 0.0 < verdict.v_alpha < 1e-5:  # margin guard near the zero branch
            continue
        game = embed_three_state(form, alpha)
        report = classify_states(game)
        if abs(report.values["q0"] - verdict.v_alpha) > 1e-4:
            continue  # value estimates disagree; tolerance-boundary sample
        assert ("q0" in report.max_states) == verdict.rm
        agreed += 1
    assert agreed >= 25
