"""Command-line surface: solve, classify, synthesize, evaluate, simulate,
gameform.  Reports are JSON objects {"manifest", "result", "warnings"} with
floats printed to 12 significant digits; identical inputs and seeds produce
byte-identical output (the wall clock is only reported in --pretty mode)."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

from . import __version__
from .classify import classify_states
from .errors import GameSolverError, GameValidationError
from .fixpoint import least_fixed_point, zero_value_set
from .gameforms import embed_three_state, f_alpha_lfp, is_determined, rm_falsify
from .mdp import evaluate_against_best_b, evaluate_pair
from .model import (
    game_to_dict,
    load_alpha,
    load_game,
    load_game_form,
    load_strategy,
    strategy_to_dict,
)
from .oracle import SimulationConfig, simulate
from .synthesize import synthesize_a, synthesize_b


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return "sha256:" + h.hexdigest()


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    return obj


def _emit(args, command: str, inputs: list[str], result: dict, warnings: list[str], started: float):
    manifest = {
        "command": command,
        "inputs": {p: _digest(p) for p in inputs},
        "version": __version__,
        "tolerances": {
            "tol": args.tol,
            "max_iter": args.max_iter,
            "theta_eq": args.theta_eq,
            "theta_strict": args.theta_strict,
        },
        "seed": getattr(args, "seed", None),
        "wall_clock_seconds": round(time.monotonic() - started, 3) if args.pretty else None,
    }
    report = {"manifest": manifest, "result": result, "warnings": warnings}
    indent = 2 if args.pretty else None
    print(json.dumps(_round_floats(report), sort_keys=True, indent=indent))


def _error(code: str, message: str, details=None) -> int:
    payload = {"error": {"code": code, "message": message}}
    if details is not None:
        payload["error"]["details"] = details
    print(json.dumps(_round_floats(payload), sort_keys=True), file=sys.stderr)
    return 1


def _values_dict(game, valuation) -> dict:
    return {q: float(valuation.values[q]) for q in game.states}


def _cmd_solve(args) -> int:
    started = time.monotonic()
    game = load_game(args.game)
    fp = least_fixed_point(game, tol=args.tol, max_iter=args.max_iter)
    result = {
        "values": _values_dict(game, fp.values),
        "iterations": fp.iterations,
        "residual": fp.residual,
        "converged": fp.converged,
        "zero_set": sorted(zero_value_set(game)),
    }
    warnings = [] if fp.converged else ["value iteration hit the iteration cap"]
    _emit(args, "solve", [args.game], result, warnings, started)
    return 0


def _cmd_classify(args) -> int:
    started = time.monotonic()
    game = load_game(args.game)
    report = classify_states(
        game,
        tol=args.tol,
        max_iter=args.max_iter,
        theta_eq=args.theta_eq,
        theta_strict=args.theta_strict,
        force=args.force,
        threads=args.threads,
    )
    result = {
        "values": _values_dict(game, report.values),
        "zero_set": sorted(report.zero_set),
        "max_states": sorted(report.max_states),
        "submax_states": sorted(report.submax_states),
        "bad_iterations": [sorted(s) for s in report.bad_iterations],
        "sec_hierarchy": [[sorted(level) for level in h] for h in report.sec_hierarchy],
        "witnesses": {
            q: {a: p for a, p in ma.probs.items() if p > 0.0}
            for q, ma in report.witnesses.items()
        },
        "tolerances": dict(report.tolerances),
        "value_bracket_width": report.value_bracket_width,
    }
    _emit(args, "classify", [args.game], result, list(report.warnings), started)
    if args.pretty:
        print(_summary_table(game, report), file=sys.stderr)
    return 0


def _summary_table(game, report) -> str:
    lines = ["state        value        verdict"]
    for q in game.states:
        verdict = "maximizable" if q in report.max_states else "sub-maximizable"
        lines.append(f"{q:<12} {report.values[q]:<12.6g} {verdict}")
    return "\n".join(lines)


def _cmd_synthesize(args) -> int:
    started = time.monotonic()
    game = load_game(args.game)
    report = classify_states(
        game,
        tol=args.tol,
        max_iter=args.max_iter,
        theta_eq=args.theta_eq,
        theta_strict=args.theta_strict,
        force=args.force,
        threads=args.threads,
    )
    if args.player == "a":
        synth = synthesize_a(
            game, report, args.epsilon, theta_eq=args.theta_eq, theta_strict=args.theta_strict
        )
        result = {
            "strategy": strategy_to_dict(synth.strategy),
            "verification": {
                "guarantee": _values_dict(game, synth.guarantee),
                "achieved": _values_dict(game, synth.achieved),
                "epsilon_effective": synth.epsilon,
                "eta": synth.eta,
                "provenance": dict(synth.provenance),
            },
        }
    else:
        sb = synthesize_b(game, report.values)
        from .mdp import evaluate_against_best_a

        sup_a = evaluate_against_best_a(game, sb).values
        result = {
            "strategy": strategy_to_dict(sb),
            "verification": {
                "values": _values_dict(game, report.values),
                "sup_opponent": _values_dict(game, sup_a),
            },
        }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(_round_floats(result["strategy"]), fh, sort_keys=True, indent=2)
    _emit(args, "synthesize", [args.game], result, list(report.warnings), started)
    return 0


def _cmd_evaluate(args) -> int:
    started = time.monotonic()
    game = load_game(args.game)
    inputs = [args.game, args.strategy_a]
    sa = load_strategy(args.strategy_a)
    if args.strategy_b:
        inputs.append(args.strategy_b)
        sb = load_strategy(args.strategy_b)
        values = evaluate_pair(game, sa, sb)
        result = {"values": _values_dict(game, values)}
    else:
        best = evaluate_against_best_b(game, sa)
        result = {
            "values": _values_dict(game, best.values),
            "witness_b": strategy_to_dict(best.strategy),
        }
    _emit(args, "evaluate", inputs, result, [], started)
    return 0


def _cmd_simulate(args) -> int:
    started = time.monotonic()
    game = load_game(args.game)
    sa = load_strategy(args.strategy_a)
    sb = load_strategy(args.strategy_b)
    cfg = SimulationConfig(runs=args.runs, horizon=args.horizon, seed=args.seed)
    est = simulate(game, sa, sb, args.start, cfg)
    result = {"p_hat": est.p_hat, "stderr": est.stderr, "runs": est.runs}
    _emit(args, "simulate", [args.game, args.strategy_a, args.strategy_b], result, [], started)
    return 0


def _cmd_gameform(args) -> int:
    started = time.monotonic()
    form = load_game_form(args.form)
    if args.gf_command == "check":
        det = is_determined(form)
        falsify = rm_falsify(form, samples=args.samples, seed=args.seed)
        result = {
            "determined": det.determined,
            "determinacy_counterexample": sorted(det.counterexample)
            if det.counterexample
            else None,
            "rm_counterexample": None,
            "rm_verdict": f"no counterexample found ({falsify.samples_checked} samples)",
        }
        if falsify.falsified:
            alpha = falsify.counterexample
            result["rm_counterexample"] = {
                "defined": dict(alpha.defined),
                "unvalued": sorted(alpha.unvalued),
            }
            result["rm_verdict"] = "not reach-maximizable"
        _emit(args, "gameform check", [args.form], result, [], started)
        return 0
    alpha = load_alpha(args.alpha)
    game = embed_three_state(form, alpha)
    fa = f_alpha_lfp(form, alpha)
    result = {
        "game": game_to_dict(game),
        "v_alpha": fa.v_alpha,
        "induced_valuation": {o: v for o, v in fa.induced.values.items()},
    }
    _emit(args, "gameform embed", [args.form, args.alpha], result, [], started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crgames",
        description="Concurrent stochastic reachability games: values, "
        "classification, strategy synthesis, game-form analysis.",
    )
    parser.add_argument("--tol", type=float, default=1e-6, help="fixed-point step tolerance")
    parser.add_argument("--max-iter", type=int, default=10**6, dest="max_iter")
    parser.add_argument("--theta-eq", type=float, default=1e-7, dest="theta_eq")
    parser.add_argument("--theta-strict", type=float, default=1e-6, dest="theta_strict")
    parser.add_argument("--force", action="store_true", help="classify even if values did not converge")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for per-state analyses")
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="canonical JSON output (default)")
    fmt.add_argument("--pretty", action="store_true", help="indented output with extra summaries")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="value vector, zero set and convergence data")
    p.add_argument("game")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("classify", help="maximizable / sub-maximizable classification")
    p.add_argument("game")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("synthesize", help="positional strategy synthesis with verification")
    p.add_argument("game")
    p.add_argument("--player", choices=["a", "b"], required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--out", help="write the strategy file here as well")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("evaluate", help="exact evaluation of strategy files")
    p.add_argument("game")
    p.add_argument("--strategy-a", required=True, dest="strategy_a")
    p.add_argument("--strategy-b", dest="strategy_b")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte-Carlo estimate of reach probability")
    p.add_argument("game")
    p.add_argument("--strategy-a", required=True, dest="strategy_a")
    p.add_argument("--strategy-b", required=True, dest="strategy_b")
    p.add_argument("--start", required=True, dest="start")
    p.add_argument("--runs", type=int, default=100_000)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gameform", help="determinacy and reach-maximizability analysis")
    gf_sub = p.add_subparsers(dest="gf_command", required=True)
    p_check = gf_sub.add_parser("check")
    p_check.add_argument("form")
    p_check.add_argument("--samples", type=int, default=500)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.set_defaults(func=_cmd_gameform)
    p_embed = gf_sub.add_parser("embed")
    p_embed.add_argument("form")
    p_embed.add_argument("--alpha", required=True)
    p_embed.set_defaults(func=_cmd_gameform)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _error("FileNotFound", str(exc))
    except GameValidationError as exc:
        return _error(
            "GameValidationError",
            "game description is invalid",
            details=[
                {"code": v.code, "entity": v.entity, "message": v.message}
                for v in exc.violations
            ],
        )
    except GameSolverError as exc:
        return _error(type(exc).__name__, str(exc))
    except (ValueError, KeyError) as exc:
        return _error(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
