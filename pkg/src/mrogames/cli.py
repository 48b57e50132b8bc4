"""Command-line entry point.

Subcommands: ``run`` (full training loop from a YAML config), ``solve``
(minimax of a payoff-matrix file), ``eval`` (one policy pair), ``prune``
(iterated dominance elimination) and ``report`` (render figures from a
finished run directory).  Results go to stdout, diagnostics to stderr;
``run`` exits 0 on epsilon-RBNE, 2 on hitting the iteration cap, 1 on
any error.

The run config is a strict YAML document (unknown keys are rejected with
their field path).  All randomness in a run flows from one base seed via
per-component derivation, so identical config plus seed reproduces every
output file byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import formats
from ._util import fmt_float
from .cyber import CyberGameParams, build_game, default_topology
from .errors import ConfigError, MrogamesError
from .evaluate import ExactEvaluator, MonteCarloEvaluator
from .game import BLUE, RED, MarkovGame, TabularPolicy, evaluate_exact
from .loop import EPSILON_RBNE, LoopConfig, run_ado, run_mro
from .matrix import eliminate_iteratively, solve_zero_sum, support_gains
from .oracles import OracleConfig, PtmSampler, ShapingConfig

GAME_PRESETS = ("rps", "matching-pennies", "tiny", "small")

_RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
_MATCHING_PENNIES = np.array([[1.0, -1.0], [-1.0, 1.0]])


def _check_keys(mapping: dict, allowed: set[str], path: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}", "required key is missing")
    return mapping[key]


def load_run_config(path: str) -> dict:
    source = Path(path)
    if not source.exists():
        raise ConfigError(str(path), "config file does not exist")
    with open(source, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(str(path), "config must be a mapping")
    _check_keys(doc, {"game", "loop", "initial_policies", "blue_oracles",
                      "red_oracles", "seed", "output_dir"}, "config")
    return doc


def resolve_game(section: dict, path: str = "config.game") -> MarkovGame:
    if not isinstance(section, dict):
        raise ConfigError(path, "must be a mapping")
    _check_keys(section, {"preset", "file", "topology", "horizon", "discount",
                          "impact_penalty", "restore_cost", "decoy_bonus",
                          "state_cap"}, path)
    sources = [k for k in ("preset", "file", "topology") if k in section]
    if len(sources) != 1:
        raise ConfigError(path, "exactly one of preset/file/topology is required")

    if "file" in section:
        return formats.parse_game(Path(section["file"]).read_text(),
                                  source=str(section["file"]))

    params = CyberGameParams(
        horizon=section.get("horizon", 25),
        discount=section.get("discount", 0.95),
        impact_penalty=section.get("impact_penalty", -10.0),
        restore_cost=section.get("restore_cost", -1.0),
        decoy_bonus=section.get("decoy_bonus", 1.0),
        state_cap=section.get("state_cap", 50_000),
    )
    if "topology" in section:
        topo = formats.parse_topology(Path(section["topology"]).read_text(),
                                      source=str(section["topology"]))
        return build_game(topo, params)

    preset = section["preset"]
    if preset == "rps":
        return _one_step(_RPS)
    if preset == "matching-pennies":
        return _one_step(_MATCHING_PENNIES)
    if preset in ("tiny", "small"):
        return build_game(default_topology(preset), params)
    raise ConfigError(f"{path}.preset", f"unknown preset {preset!r}; "
                      f"choose from {', '.join(GAME_PRESETS)}")


def _one_step(payoff: np.ndarray) -> MarkovGame:
    from .cyber import one_step_matrix_game
    return one_step_matrix_game(payoff)


def _resolve_initial(raw, game: MarkovGame, player: str, path: str,
                     ) -> TabularPolicy | None:
    if raw is None or raw == "uniform":
        return None
    actions = game.action_count(player)
    if isinstance(raw, str) and raw.startswith("pure:"):
        try:
            action = int(raw.split(":", 1)[1])
        except ValueError:
            raise ConfigError(path, f"bad pure action in {raw!r}") from None
        return TabularPolicy.pure(game.state_count, actions, action, player)
    if isinstance(raw, str):
        policy = formats.parse_policy(Path(raw).read_text(), source=raw)
        if policy.player != player:
            raise ConfigError(path, f"policy file is for {policy.player}, expected {player}")
        return policy
    raise ConfigError(path, "expected 'uniform', 'pure:N' or a policy path")


def _parse_shaping(section: dict, path: str) -> ShapingConfig:
    _check_keys(section, {"mode", "tau", "gamma_phi", "vf_index"}, path)
    return ShapingConfig(
        tau=section.get("tau", 1.0),
        gamma_phi=section.get("gamma_phi", 1.0),
        mode=section.get("mode", "off"),
        vf_index=section.get("vf_index"),
    )


def _parse_ptm(section: dict, game: MarkovGame, player: str, path: str,
               initial: TabularPolicy | None) -> PtmSampler:
    _check_keys(section, {"epsilon", "decay", "generalist", "rng_seed"}, path)
    generalist = None
    raw = section.get("generalist")
    if raw == "initial":
        generalist = initial or TabularPolicy.uniform(
            game.state_count, game.action_count(player), player)
    elif isinstance(raw, str):
        generalist = formats.parse_policy(Path(raw).read_text(), source=raw)
    return PtmSampler(
        epsilon=section.get("epsilon", 1.0),
        decay=section.get("decay", 0.95),
        generalist=generalist,
        rng_seed=section.get("rng_seed", 0),
    )


def _parse_oracles(entries, game: MarkovGame, player: str, path: str,
                   initial: TabularPolicy | None) -> list[OracleConfig]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError(path, "must be a nonempty list of oracle mappings")
    oracles = []
    for i, entry in enumerate(entries):
        ipath = f"{path}[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(ipath, "must be a mapping")
        _check_keys(entry, {"kind", "name", "vi_tolerance", "step_budget",
                            "learning_rate_power", "explore_start", "explore_end",
                            "checkpoints", "checkpoint_eval_episodes", "discount",
                            "shaping", "ptm", "seed"}, ipath)
        shaping = _parse_shaping(entry.get("shaping", {}), f"{ipath}.shaping")
        ptm = None
        if "ptm" in entry:
            ptm = _parse_ptm(entry["ptm"], game, player, f"{ipath}.ptm", initial)
        oracles.append(OracleConfig(
            kind=_require(entry, "kind", ipath),
            name=entry.get("name", ""),
            vi_tolerance=entry.get("vi_tolerance", 1e-10),
            step_budget=entry.get("step_budget", 20_000),
            learning_rate_power=entry.get("learning_rate_power", 0.6),
            explore_start=entry.get("explore_start", 1.0),
            explore_end=entry.get("explore_end", 0.05),
            checkpoints=entry.get("checkpoints", 20),
            checkpoint_eval_episodes=entry.get("checkpoint_eval_episodes", 20),
            discount=entry.get("discount"),
            shaping=shaping,
            ptm=ptm,
            seed=entry.get("seed", 0),
        ))
    return oracles


def cmd_run(args) -> int:
    doc = load_run_config(args.config)
    game = resolve_game(_require(doc, "game", "config"))

    init_section = doc.get("initial_policies", {}) or {}
    _check_keys(init_section, {"blue", "red"}, "config.initial_policies")
    initial_blue = _resolve_initial(init_section.get("blue"), game, BLUE,
                                    "config.initial_policies.blue")
    initial_red = _resolve_initial(init_section.get("red"), game, RED,
                                   "config.initial_policies.red")

    blue_oracles = _parse_oracles(_require(doc, "blue_oracles", "config"), game,
                                  BLUE, "config.blue_oracles", initial_blue)
    red_oracles = _parse_oracles(_require(doc, "red_oracles", "config"), game,
                                 RED, "config.red_oracles", initial_red)

    loop_section = doc.get("loop", {}) or {}
    _check_keys(loop_section, {"epsilon", "max_iterations", "evaluator", "episodes"},
                "config.loop")
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    cfg = LoopConfig(
        epsilon=loop_section.get("epsilon", 1e-6),
        max_iterations=loop_section.get("max_iterations", 100),
        blue_oracles=blue_oracles,
        red_oracles=red_oracles,
        evaluator_kind=loop_section.get("evaluator", "exact"),
        evaluator_episodes=loop_section.get("episodes", 100),
        base_seed=seed,
        initial_blue=initial_blue,
        initial_red=initial_red,
    )

    out_dir = Path(args.output_dir or doc.get("output_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    if len(blue_oracles) == 1 and len(red_oracles) == 1:
        trace = run_ado(game, blue_oracles[0], red_oracles[0], cfg)
    else:
        trace = run_mro(game, blue_oracles, red_oracles, cfg)

    (out_dir / "convergence.csv").write_text(formats.write_convergence_csv(trace))
    eg = trace.empirical
    (out_dir / "payoff_matrix.matrix").write_text(formats.write_matrix(
        eg.payoff, [p.metadata for p in eg.blue_registry],
        [p.metadata for p in eg.red_registry]))
    (out_dir / "mixtures.mixture").write_text(formats.write_mixtures(trace.solution))
    policy_dir = out_dir / "policies"
    policy_dir.mkdir(exist_ok=True)
    for i, pol in enumerate(eg.blue_registry):
        (policy_dir / f"blue_{i:03d}.policy").write_text(formats.write_policy(pol))
    for j, pol in enumerate(eg.red_registry):
        (policy_dir / f"red_{j:03d}.policy").write_text(formats.write_policy(pol))

    if not args.quiet:
        print(f"termination = {trace.termination}")
        print(f"iterations = {trace.iterations}")
        print(f"value = {fmt_float(trace.solution.value)}")
        print(f"exploitability = {fmt_float(trace.final_exploitability)}")
        print(f"artifacts = {out_dir}")
    return 0 if trace.termination == EPSILON_RBNE else 2


def cmd_solve(args) -> int:
    source = Path(args.matrix)
    payoff, _, _ = formats.parse_matrix(source.read_text(), source=str(source))
    result = solve_zero_sum(payoff)
    blue_gains, red_gains = support_gains(payoff, result.blue_mixture,
                                          result.red_mixture)
    out_dir = Path(args.output_dir or source.parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / (source.stem + ".mixture")
    out_path.write_text(formats.write_mixtures(result))

    print(f"value = {fmt_float(result.value)}")
    print("blue_mixture = " + " ".join(fmt_float(w) for w in result.blue_mixture.weights))
    print("red_mixture = " + " ".join(fmt_float(w) for w in result.red_mixture.weights))
    for i in result.blue_mixture.support():
        print(f"blue_support[{i}] gain = {fmt_float(blue_gains[i])}")
    for j in result.red_mixture.support():
        print(f"red_support[{j}] gain = {fmt_float(red_gains[j])}")
    if not args.quiet:
        print(f"mixture file = {out_path}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    game = resolve_game({"preset": args.game} if args.game in GAME_PRESETS
                        else {"file": args.game}, path="game")
    blue = formats.parse_policy(Path(args.blue_policy).read_text(),
                                source=args.blue_policy)
    red = formats.parse_policy(Path(args.red_policy).read_text(),
                               source=args.red_policy)
    if args.evaluator == "exact":
        result = ExactEvaluator().pair(game, blue, red)
        print(f"gain_blue = {fmt_float(result.mean_gain_blue)}")
    else:
        seed = args.seed if args.seed is not None else 0
        result = MonteCarloEvaluator(args.episodes, seed).pair(game, blue, red)
        print(f"gain_blue = {fmt_float(result.mean_gain_blue)}")
        print(f"std_error = {fmt_float(result.std_error)}")
        print(f"episodes = {result.episode_count}")
    return 0


def cmd_prune(args) -> int:
    source = Path(args.matrix)
    payoff, _, _ = formats.parse_matrix(source.read_text(), source=str(source))
    reduced, blue_order, red_order = eliminate_iteratively(payoff, args.mode)
    print(f"mode = {args.mode}")
    print(f"original = {payoff.shape[0]}x{payoff.shape[1]}")
    print(f"reduced = {reduced.shape[0]}x{reduced.shape[1]}")
    print("removed_blue = " + (" ".join(map(str, blue_order)) if blue_order else "none"))
    print("removed_red = " + (" ".join(map(str, red_order)) if red_order else "none"))
    if args.mode == "strict":
        before = solve_zero_sum(payoff).value
        after = solve_zero_sum(reduced).value
        print(f"value_before = {fmt_float(before)}")
        print(f"value_after = {fmt_float(after)}")
        print(f"value_drift = {fmt_float(abs(after - before))}")
    out_dir = Path(args.output_dir or source.parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / (source.stem + ".reduced.matrix")
    out_path.write_text(formats.write_matrix(reduced))
    if not args.quiet:
        print(f"reduced matrix file = {out_path}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    from . import report
    run_dir = Path(args.run_dir)
    out_dir = Path(args.output_dir or run_dir)
    written = report.render_run(run_dir, out_dir)
    if not args.quiet:
        for path in written:
            print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None,
                        help="override the base seed")
    shared.add_argument("--output-dir", default=None,
                        help="directory for output artifacts")
    shared.add_argument("--quiet", action="store_true",
                        help="suppress non-essential output")

    parser = argparse.ArgumentParser(
        prog="mrogames",
        description="Adversarial training in zero-sum Markov games via "
                    "iterated best-response oracles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[shared],
                           help="run a training loop from a YAML config")
    p_run.add_argument("config", help="path to the run config")
    p_run.set_defaults(func=cmd_run)

    p_solve = sub.add_parser("solve", parents=[shared],
                             help="solve a payoff-matrix file")
    p_solve.add_argument("matrix", help="path to a .matrix file")
    p_solve.set_defaults(func=cmd_solve)

    p_eval = sub.add_parser("eval", parents=[shared],
                            help="evaluate one blue/red policy pair")
    p_eval.add_argument("game", help="game preset name or .game file")
    p_eval.add_argument("blue_policy")
    p_eval.add_argument("red_policy")
    p_eval.add_argument("--evaluator", choices=("exact", "monte-carlo"),
                        default="exact")
    p_eval.add_argument("--episodes", type=int, default=100)
    p_eval.set_defaults(func=cmd_eval)

    p_prune = sub.add_parser("prune", parents=[shared],
                             help="iterated elimination of dominated strategies")
    p_prune.add_argument("matrix", help="path to a .matrix file")
    p_prune.add_argument("--mode", choices=("strict", "weak"), default="strict")
    p_prune.set_defaults(func=cmd_prune)

    p_report = sub.add_parser("report", parents=[shared],
                              help="render figures from a run directory")
    p_report.add_argument("run_dir")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MrogamesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
