"""Induced MDPs, end components, BSCCs, exact evaluation, best responses."""

import numpy as np
import pytest

from crgames.fixpoint import least_fixed_point, zero_value_set, local_matrices
from crgames.matrix import MatrixGame, solve
from crgames.mdp import (
    bsccs_under,
    chain_matrix,
    check_local_domination,
    evaluate_against_best_a,
    evaluate_against_best_b,
    evaluate_pair,
    finite_horizon_prob,
    finite_horizon_reach_set,
    induce_mdp,
    maximal_end_components,
    optimal_b_strategy,
)
from crgames.model import MixedAction, PositionalStrategy, StateValuation, validate_game
from conftest import random_game, random_positional


def pure_a(game, action):
    return PositionalStrategy("A", {q: MixedAction({action: 1.0}) for q in game.states})


def pure_b(game, action):
    return PositionalStrategy("B", {q: MixedAction({action: 1.0}) for q in game.states})


def mixed_a(game, p):
    ma = MixedAction({"a1": p, "a2": 1.0 - p})
    return PositionalStrategy("A", {q: ma for q in game.states})


def test_induce_mdp_snowball_pure(snowball):
    mdp = induce_mdp(snowball, pure_a(snowball, "a1"))
    q0 = snowball.state_index("q0")
    np.testing.assert_allclose(mdp.iota[q0, 0], [1.0, 0.0, 0.0])  # b1 -> q0
    np.testing.assert_allclose(mdp.iota[q0, 1], [0.0, 1.0, 0.0])  # b2 -> top


def test_induce_mdp_snowball_mixed(snowball):
    mdp = induce_mdp(snowball, mixed_a(snowball, 0.5))
    q0 = snowball.state_index("q0")
    np.testing.assert_allclose(mdp.iota[q0, 0], [0.5, 0.5, 0.0])


def test_induced_rows_are_distributions():
    rng = np.random.default_rng(6)
    for _ in range(10):
        game = random_game(rng, n_states=4)
        mdp = induce_mdp(game, random_positional(rng, game, "A"))
        np.testing.assert_allclose(mdp.iota.sum(axis=2), 1.0, atol=1e-9)


def test_mecs_snowball_trap(snowball):
    mdp = induce_mdp(snowball, pure_a(snowball, "a1"))
    mecs = {ec.states: ec.actions for ec in maximal_end_components(mdp)}
    assert frozenset({"top"}) in mecs
    assert frozenset({"bot"}) in mecs
    assert mecs[frozenset({"q0"})]["q0"] == frozenset({"b1"})


def test_mecs_snowball_leaky(snowball):
    mdp = induce_mdp(snowball, mixed_a(snowball, 0.9))
    assert {ec.states for ec in maximal_end_components(mdp)} == {
        frozenset({"top"}),
        frozenset({"bot"}),
    }


def test_mec_whole_cycle():
    game = validate_game(
        {
            "states": ["u", "w", "top"],
            "target": "top",
            "actions_a": ["a1"],
            "actions_b": ["b1", "b2"],
            "nature": {
                "d_u": {"u": 1.0},
                "d_w": {"w": 1.0},
                "d_top": {"top": 1.0},
            },
            "delta": {
                "u": [["d_w", "d_w"]],
                "w": [["d_u", "d_u"]],
                "top": [["d_top", "d_top"]],
            },
        }
    )
    mdp = induce_mdp(game, pure_a(game, "a1"))
    assert {ec.states for ec in maximal_end_components(mdp)} == {
        frozenset({"u", "w"}),
        frozenset({"top"}),
    }


def test_mec_invariants_on_random_games():
    rng = np.random.default_rng(15)
    for _ in range(20):
        game = random_game(rng, n_states=5, loopiness=0.5)
        mdp = induce_mdp(game, random_positional(rng, game, "A"))
        mecs = maximal_end_components(mdp)
        seen = set()
        for ec in mecs:
            assert not (set(ec.states) & seen), "MECs must be pairwise disjoint"
            seen |= set(ec.states)
            member_idx = {game.state_index(q) for q in ec.states}
            for q, actions in ec.actions.items():
                assert actions, "enabled action sets are non-empty"
                qi = game.state_index(q)
                for b in actions:
                    bi = game.actions_b.index(b)
                    support = set(np.nonzero(mdp.iota[qi, bi] > 1e-12)[0].tolist())
                    assert support <= member_idx, "closure violated"


def test_bsccs_snowball(snowball):
    mdp = induce_mdp(snowball, pure_a(snowball, "a1"))
    assert set(bsccs_under(mdp, pure_b(snowball, "b1"))) == {
        frozenset({"q0"}),
        frozenset({"top"}),
        frozenset({"bot"}),
    }
    assert set(bsccs_under(mdp, pure_b(snowball, "b2"))) == {
        frozenset({"top"}),
        frozenset({"bot"}),
    }


def test_bsccs_inside_mecs_and_reachable():
    rng = np.random.default_rng(25)
    for _ in range(20):
        game = random_game(rng, n_states=5, loopiness=0.4)
        sa = random_positional(rng, game, "A")
        sb = random_positional(rng, game, "B")
        mdp = induce_mdp(game, sa)
        mec_sets = [ec.states for ec in maximal_end_components(mdp)]
        bsccs = bsccs_under(mdp, sb)
        for bscc in bsccs:
            assert any(bscc <= mec for mec in mec_sets)
        chain = chain_matrix(game, sa, sb)
        targets = np.zeros(game.n_states, dtype=bool)
        for bscc in bsccs:
            for q in bscc:
                targets[game.state_index(q)] = True
        probs = finite_horizon_reach_set(chain, targets, game.n_states)
        assert (probs > 0.0).all()


def test_evaluate_pair_snowball(snowball):
    sa = mixed_a(snowball, 0.9)
    assert evaluate_pair(snowball, sa, pure_b(snowball, "b2"))["q0"] == pytest.approx(0.9)
    assert evaluate_pair(snowball, sa, pure_b(snowball, "b1"))["q0"] == pytest.approx(1.0)
    assert evaluate_pair(snowball, sa, pure_b(snowball, "b1"))["top"] == 1.0


def test_evaluate_pair_matches_finite_horizon_limit():
    rng = np.random.default_rng(41)
    for _ in range(10):
        game = random_game(rng, n_states=4, sink_mass=0.15)
        sa = random_positional(rng, game, "A")
        sb = random_positional(rng, game, "B")
        exact = evaluate_pair(game, sa, sb)
        horizon = 50 * game.n_states
        for q in game.states:
            approx = finite_horizon_prob(game, sa, sb, q, horizon)
            assert approx == pytest.approx(exact[q], abs=1e-3)


def test_finite_horizon_snowball(snowball):
    sa = PositionalStrategy.uniform(snowball, "A")
    sb = PositionalStrategy.uniform(snowball, "B")
    assert finite_horizon_prob(snowball, sa, sb, "q0", 1) == pytest.approx(0.5)
    assert finite_horizon_prob(snowball, sa, sb, "q0", 2) == pytest.approx(0.625)
    assert finite_horizon_prob(snowball, sa, sb, "top", 0) == 1.0
    assert finite_horizon_prob(snowball, sa, sb, "q0", 0) == 0.0


def test_finite_horizon_monotone_in_n(snowball):
    sa = PositionalStrategy.uniform(snowball, "A")
    sb = PositionalStrategy.uniform(snowball, "B")
    probs = [finite_horizon_prob(snowball, sa, sb, "q0", n) for n in range(10)]
    assert all(a <= b + 1e-12 for a, b in zip(probs, probs[1:]))


def test_best_response_b_snowball(snowball):
    trapped = evaluate_against_best_b(snowball, pure_a(snowball, "a1"))
    assert trapped.values["q0"] == pytest.approx(0.0)
    leaky = evaluate_against_best_b(snowball, mixed_a(snowball, 0.9))
    assert leaky.values["q0"] == pytest.approx(0.9)
    assert leaky.strategy.choices["q0"].probs.get("b2", 0.0) == pytest.approx(1.0)
    assert leaky.values["top"] == 1.0


def test_best_response_b_is_really_best():
    # no positional B strategy beats the policy-iteration value from below
    rng = np.random.default_rng(43)
    for _ in range(10):
        game = random_game(rng, n_states=4, loopiness=0.4)
        sa = random_positional(rng, game, "A")
        best = evaluate_against_best_b(game, sa)
        base = best.values.vector(game)
        achieved = evaluate_pair(game, sa, best.strategy).vector(game)
        np.testing.assert_allclose(achieved, base, atol=1e-9)
        for _ in range(20):
            sb = random_positional(rng, game, "B")
            other = evaluate_pair(game, sa, sb).vector(game)
            assert (other >= base - 1e-9).all()


def test_optimal_b_strategy_snowball_tiebreak(snowball):
    fp = least_fixed_point(snowball, tol=1e-7)
    m = StateValuation({"q0": 1.0, "top": 1.0, "bot": 0.0})
    sb = optimal_b_strategy(snowball, m)
    assert sb.choices["q0"].probs.get("b1", 0.0) == pytest.approx(1.0)


def test_optimal_b_strategy_bound_on_random_games():
    rng = np.random.default_rng(47)
    for _ in range(15):
        game = random_game(rng, n_states=4, sink_mass=0.15)
        fp = least_fixed_point(game, tol=1e-10)
        sb = optimal_b_strategy(game, fp.values)
        sup_a = evaluate_against_best_a(game, sb).values.vector(game)
        assert (sup_a <= fp.values.vector(game) + 1e-4).all()


def test_optimal_b_on_all_zero_game():
    game = validate_game(
        {
            "states": ["q", "top"],
            "target": "top",
            "actions_a": ["a1"],
            "actions_b": ["b1", "b2"],
            "nature": {"d_loop": {"q": 1.0}, "d_top": {"top": 1.0}},
            "delta": {"q": [["d_loop", "d_loop"]], "top": [["d_top", "d_top"]]},
        }
    )
    fp = least_fixed_point(game)
    sb = optimal_b_strategy(game, fp.values)
    sup_a = evaluate_against_best_a(game, sb).values
    assert sup_a["q"] == pytest.approx(0.0)


def test_local_domination_snowball(snowball):
    m = StateValuation({"q0": 1.0, "top": 1.0, "bot": 0.0})
    report = check_local_domination(snowball, pure_a(snowball, "a1"), m)
    assert not report.violations
    assert report.margins["q0"] == pytest.approx(0.0)


def test_local_domination_trivial_on_zero_valuation():
    rng = np.random.default_rng(53)
    game = random_game(rng, n_states=4)
    v = StateValuation({q: 1.0 if q == "top" else 0.0 for q in game.states})
    report = check_local_domination(game, random_positional(rng, game, "A"), v)
    assert not report.violations


def test_local_domination_matches_recomputation():
    rng = np.random.default_rng(59)
    game = random_game(rng, n_states=4)
    sa = random_positional(rng, game, "A")
    vec = rng.random(game.n_states)
    v = StateValuation({q: float(vec[i]) for i, q in enumerate(game.states)})
    report = check_local_domination(game, sa, v)
    matrices = local_matrices(game, v.vector(game))
    sa_mat = sa.matrix(game)
    for i, q in enumerate(game.states):
        expected = (sa_mat[i] @ matrices[i]).min() - vec[i]
        assert report.margins[q] == pytest.approx(float(expected), abs=1e-12)


def test_ec_states_share_their_value():
    # strategies locally dominating v force v constant on end components
    rng = np.random.default_rng(61)
    checked = 0
    for _ in range(30):
        game = random_game(rng, n_states=5, sink_mass=0.1, loopiness=0.45)
        fp = least_fixed_point(game, tol=1e-10)
        m_vec = fp.values.vector(game)
        matrices = local_matrices(game, m_vec)
        choices = {
            q: MixedAction.from_vector(
                game.actions_a, solve(MatrixGame(matrices[i])).row_strategy
            )
            for i, q in enumerate(game.states)
        }
        sa = PositionalStrategy("A", choices)
        for ec in maximal_end_components(induce_mdp(game, sa)):
            vals = [fp.values[q] for q in ec.states]
            assert max(vals) - min(vals) <= 2e-6
            for q in ec.states:
                i = game.state_index(q)
                strat_val = (sa.matrix(game)[i] @ matrices[i]).min()
                assert strat_val == pytest.approx(fp.values[q], abs=2e-6)
            checked += 1
    assert checked >= 30  # the sampler must actually produce end components


def test_sufficient_condition_for_guarantee():
    # locally dominating + all non-target MECs in the zero set => guarantees v
    rng = np.random.default_rng(67)
    tested = 0
    for _ in range(40):
        game = random_game(rng, n_states=4, sink_mass=0.2, loopiness=0.3)
        fp = least_fixed_point(game, tol=1e-10)
        m_vec = fp.values.vector(game)
        matrices = local_matrices(game, m_vec)
        choices = {
            q: MixedAction.from_vector(
                game.actions_a, solve(MatrixGame(matrices[i])).row_strategy
            )
            for i, q in enumerate(game.states)
        }
        sa = PositionalStrategy("A", choices)
        if check_local_domination(game, sa, fp.values).violations:
            continue
        zero = zero_value_set(game)
        mecs = maximal_end_components(induce_mdp(game, sa))
        if any(
            ec.states != frozenset({game.target}) and not ec.states <= zero
            for ec in mecs
        ):
            continue
        achieved = evaluate_against_best_b(game, sa).values.vector(game)
        assert (achieved >= m_vec - 1e-4).all()
        tested += 1
    assert tested >= 10
