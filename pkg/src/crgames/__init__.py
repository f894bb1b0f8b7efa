"""Concurrent stochastic reachability games: values, classification,
positional strategy synthesis and game-form analysis."""

__version__ = "0.1.0"

from .classify import (
    EffQuery,
    RefinedValues,
    classify_states,
    progressive_strategies,
    refine_values,
    risky_strategies_excluded,
    secure_states,
)
from .errors import (
    CapExceeded,
    ConstructionFailed,
    DegenerateGap,
    DimensionMismatch,
    GameSolverError,
    GameValidationError,
    SingularSystem,
    SolverDidNotConverge,
    ValuesNotConverged,
)
from .fixpoint import (
    FixpointResult,
    apply_delta,
    least_fixed_point,
    lift,
    zero_value_set,
)
from .gameforms import (
    DeterminacyResult,
    FalsifyResult,
    RmVerdict,
    embed_three_state,
    f_alpha_lfp,
    is_determined,
    rm_falsify,
    rm_wrt,
)
from .matrix import (
    MatrixGame,
    MatrixSolution,
    SupportPattern,
    enumerate_support_patterns,
    optimal_actions,
    payoff,
    solve,
    value_of_row_strategy,
)
from .mdp import (
    BestResponse,
    EndComponent,
    InducedMdp,
    bsccs_under,
    check_local_domination,
    evaluate_against_best_a,
    evaluate_against_best_b,
    evaluate_pair,
    finite_horizon_prob,
    induce_mdp,
    maximal_end_components,
    optimal_b_strategy,
)
from .model import (
    ClassificationReport,
    ConcurrentGame,
    GameForm,
    MixedAction,
    NatureValuation,
    OutcomeValuation,
    PartialValuation,
    PositionalStrategy,
    StateValuation,
    collect_violations,
    game_to_dict,
    load_game,
    load_game_form,
    load_strategy,
    local_interaction,
    transition_prob,
    validate_game,
)
from .synthesize import (
    SynthesisResult,
    increasing_valuation,
    optimal_action_gap,
    synthesize_a,
    synthesize_b,
)
