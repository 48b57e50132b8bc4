"""Iterated best-response training over a growing empirical game.

One iteration: every configured oracle responds to the opposing mixture,
the per-player best responses define the exploitability

    E = [G_blue(best_blue, mu_red) - v] + [G_red(mu_blue, best_red) + v],

i.e. the summed improvements over the solved restricted-game value.  If E
is within the termination threshold the run stops as an epsilon-RBNE;
otherwise all non-duplicate responses augment the payoff matrix, the
matrix is re-solved, and warm-start samplers decay once.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ._util import stable_seed
from .errors import ConfigError, InvalidArgumentError
from .evaluate import Evaluator, ExactEvaluator, MonteCarloEvaluator
from .game import (
    BLUE,
    RED,
    MarkovGame,
    Mixture,
    PolicyMetadata,
    TabularPolicy,
    induce_decision_problem,
)
from .matrix import EmpiricalGame, SolveResult, augment
from .oracles import (
    MixtureRolloutEnv,
    OracleConfig,
    PtmChoice,
    ValueFunctionTable,
    ensemble_potential_table,
    exact_best_response,
    q_learning_response,
    sample_ptm,
    zscore_normalize,
)

EPSILON_RBNE = "epsilon-rbne"
MAX_ITERATIONS = "max-iterations"


@dataclass
class LoopConfig:
    """Settings shared by the double-oracle and multi-oracle runs."""

    epsilon: float = 1e-6
    max_iterations: int = 100
    blue_oracles: list[OracleConfig] = field(default_factory=list)
    red_oracles: list[OracleConfig] = field(default_factory=list)
    evaluator_kind: str = "exact"  # exact | monte-carlo
    evaluator_episodes: int = 100
    base_seed: int = 0
    record_path: str | None = None
    initial_blue: TabularPolicy | None = None
    initial_red: TabularPolicy | None = None
    observe_blue: Callable[[int, np.random.Generator], int] | None = None
    observe_red: Callable[[int, np.random.Generator], int] | None = None

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise InvalidArgumentError("epsilon must be nonnegative")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.evaluator_kind not in ("exact", "monte-carlo"):
            raise InvalidArgumentError(
                f"evaluator must be 'exact' or 'monte-carlo', got {self.evaluator_kind!r}"
            )

    def make_evaluator(self) -> Evaluator:
        if self.evaluator_kind == "exact":
            return ExactEvaluator()
        return MonteCarloEvaluator(self.evaluator_episodes,
                                   stable_seed(self.base_seed, "evaluator"))


@dataclass
class IterationRecord:
    """Everything observable about one response iteration."""

    iteration: int
    blue_gains: tuple[float, ...]
    red_gains: tuple[float, ...]
    blue_best_index: int
    red_best_index: int
    blue_best_gain: float
    red_best_gain: float
    value: float
    exploitability: float
    new_cells: int
    blue_added: int
    red_added: int
    cumulative_evaluations: int
    blue_mixture: tuple[float, ...]
    red_mixture: tuple[float, ...]
    ptm_choices: tuple[str, ...]
    epsilon_ptm: float | None
    combined_std_error: float
    effective_epsilon: float

    def recomputed_exploitability(self) -> float:
        return (self.blue_best_gain - self.value) + (self.red_best_gain + self.value)


@dataclass
class RunTrace:
    records: list[IterationRecord]
    empirical: EmpiricalGame
    solution: SolveResult
    termination: str
    blue_value_tables: list[ValueFunctionTable | None] = field(default_factory=list)
    red_value_tables: list[ValueFunctionTable | None] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_exploitability(self) -> float:
        return self.records[-1].exploitability if self.records else float("nan")


def select_best(responses: Sequence[tuple[TabularPolicy, float]],
                ) -> tuple[TabularPolicy, float]:
    """The response with maximal gain; ties go to the earliest oracle."""
    if not responses:
        raise InvalidArgumentError("select_best needs at least one response")
    idx = _select_best_index([gain for _, gain in responses])
    return responses[idx]


def _select_best_index(gains: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(gains)):
        if gains[i] > gains[best]:
            best = i
    return best


def exploitability(game: MarkovGame, eg: EmpiricalGame,
                   mixtures: tuple[Mixture, Mixture],
                   best_blue: TabularPolicy, best_red: TabularPolicy,
                   evaluator: Evaluator) -> float:
    """Summed best-response improvements over the mixtures' matrix value.

    The evaluator must be the one that produced the matrix entries.
    """
    if evaluator.signature() != eg.evaluator.signature():
        raise ConfigError("evaluator",
                          "exploitability must use the evaluator that filled the matrix")
    blue_mixture, red_mixture = mixtures
    value = float(blue_mixture.weights @ eg.payoff @ red_mixture.weights)
    gain_blue = evaluator.vs_mixture(game, best_blue, eg.red_registry, red_mixture,
                                     tag="exploitability:blue").gain(BLUE)
    gain_red = evaluator.vs_mixture(game, best_red, eg.blue_registry, blue_mixture,
                                    tag="exploitability:red").gain(RED)
    return (gain_blue - value) + (gain_red + value)


@dataclass
class _Response:
    policy: TabularPolicy
    value_table: ValueFunctionTable
    gain: float
    std_error: float
    ptm_label: str | None


class _Runner:
    def __init__(self, game: MarkovGame, blue_oracles: list[OracleConfig],
                 red_oracles: list[OracleConfig], cfg: LoopConfig):
        if not blue_oracles or not red_oracles:
            raise InvalidArgumentError("both players need at least one oracle")
        self.game = game
        self.cfg = cfg
        # private copies: warm-start decay counters must not leak into the caller
        self.blue_oracles = [copy.deepcopy(o) for o in blue_oracles]
        self.red_oracles = [copy.deepcopy(o) for o in red_oracles]
        self.evaluator = cfg.make_evaluator()

        init_blue = cfg.initial_blue or TabularPolicy.uniform(
            game.state_count, game.blue_action_count, BLUE,
            PolicyMetadata(oracle="initial"))
        init_red = cfg.initial_red or TabularPolicy.uniform(
            game.state_count, game.red_action_count, RED,
            PolicyMetadata(oracle="initial"))
        game.check_policy(init_blue)
        game.check_policy(init_red)
        self.eg = EmpiricalGame.from_initial(game, self.evaluator, init_blue, init_red)
        self.blue_vfs: list[ValueFunctionTable | None] = [None]
        self.red_vfs: list[ValueFunctionTable | None] = [None]

    def _own(self, player: str):
        if player == BLUE:
            return self.eg.blue_registry, self.blue_vfs
        return self.eg.red_registry, self.red_vfs

    def _opp(self, player: str, solution: SolveResult):
        if player == BLUE:
            return self.eg.red_registry, solution.red_mixture
        return self.eg.blue_registry, solution.blue_mixture

    def _potential(self, oc: OracleConfig, player: str,
                   own_mixture: Mixture) -> Callable[[int], float] | None:
        """Potential over the player's own value tables.

        Missing tables (e.g. the initial policies) are skipped and the
        remaining weights renormalized; no usable table means the shaping
        term is inert for this response.
        """
        if not oc.shaping.active:
            return None
        _, vfs = self._own(player)
        if oc.shaping.mode == "single":
            k = oc.shaping.vf_index
            if k is None or k >= len(vfs) or vfs[k] is None:
                return None
            table = zscore_normalize(vfs[k]).values
        else:
            pairs = [(w, vf) for w, vf in zip(own_mixture.weights, vfs)
                     if vf is not None and w > 0.0]
            if not pairs:
                return None
            weights = np.array([w for w, _ in pairs])
            weights /= weights.sum()
            table = ensemble_potential_table(
                [vf for _, vf in pairs], Mixture(weights, player))
        return lambda s: float(table[s])

    def respond(self, player: str, oracle_index: int, oc: OracleConfig,
                solution: SolveResult, iteration: int) -> _Response:
        opp_registry, opp_mixture = self._opp(player, solution)
        own_registry, _ = self._own(player)
        own_mixture = solution.blue_mixture if player == BLUE else solution.red_mixture
        ptm_label = None

        if oc.kind == "exact-vi":
            mdp = induce_decision_problem(self.game, opp_mixture, opp_registry, player)
            policy, vf = exact_best_response(mdp, oc.vi_tolerance)
        else:
            init = None
            if oc.ptm is not None:
                rng = np.random.default_rng(
                    [oc.ptm.rng_seed, stable_seed("ptm", player, oracle_index), iteration])
                choice = sample_ptm(oc.ptm, own_registry, own_mixture, rng)
                ptm_label = f"{player}/{oc.label()}:{choice.label()}"
                init = self._resolve_init(choice, own_registry, oc)
            potential = self._potential(oc, player, own_mixture)
            observe = self.cfg.observe_blue if player == BLUE else self.cfg.observe_red
            env = MixtureRolloutEnv(self.game, player, opp_registry, opp_mixture,
                                    observe=observe)
            run_cfg = replace(
                oc, seed=stable_seed(self.cfg.base_seed, "oracle", player,
                                     oracle_index, iteration, oc.seed))
            policy, vf, _curve = q_learning_response(env, run_cfg, init=init,
                                                     potential=potential)

        policy = replace(policy, metadata=replace(
            policy.metadata, oracle=oc.label(), iteration=iteration))
        vf = ValueFunctionTable(vf.values, origin=(oc.label(), iteration))
        result = self.evaluator.vs_mixture(
            self.game, policy, opp_registry, opp_mixture,
            tag=f"{player}:{oracle_index}:{iteration}")
        return _Response(policy, vf, result.gain(player), result.std_error, ptm_label)

    def _resolve_init(self, choice: PtmChoice, registry: list[TabularPolicy],
                      oc: OracleConfig) -> TabularPolicy | None:
        if choice.kind == "registry":
            return registry[choice.index]
        if choice.kind == "generalist":
            return oc.ptm.generalist
        return None  # fresh

    def run(self) -> RunTrace:
        cfg = self.cfg
        solution = self.eg.solve()
        records: list[IterationRecord] = []
        termination = MAX_ITERATIONS

        for iteration in range(1, cfg.max_iterations + 1):
            blue_responses = [self.respond(BLUE, i, oc, solution, iteration)
                              for i, oc in enumerate(self.blue_oracles)]
            red_responses = [self.respond(RED, i, oc, solution, iteration)
                             for i, oc in enumerate(self.red_oracles)]
            for oc in self.blue_oracles + self.red_oracles:
                if oc.ptm is not None:
                    oc.ptm.decay_step()

            best_b = _select_best_index([r.gain for r in blue_responses])
            best_r = _select_best_index([r.gain for r in red_responses])
            value = solution.value
            improvement_blue = blue_responses[best_b].gain - value
            improvement_red = red_responses[best_r].gain + value
            expl = improvement_blue + improvement_red
            combined_std = (blue_responses[best_b].std_error
                            + red_responses[best_r].std_error)
            effective = cfg.epsilon + (2.0 * combined_std
                                       if cfg.evaluator_kind == "monte-carlo" else 0.0)

            terminal = expl <= effective
            new_blue: list[_Response] = [] if terminal else self._dedupe(BLUE, blue_responses)
            new_red: list[_Response] = [] if terminal else self._dedupe(RED, red_responses)
            cells = 0
            if new_blue or new_red:
                cells = augment(self.eg, [r.policy for r in new_blue],
                                [r.policy for r in new_red])
                self.blue_vfs.extend(r.value_table for r in new_blue)
                self.red_vfs.extend(r.value_table for r in new_red)

            records.append(IterationRecord(
                iteration=iteration,
                blue_gains=tuple(r.gain for r in blue_responses),
                red_gains=tuple(r.gain for r in red_responses),
                blue_best_index=best_b,
                red_best_index=best_r,
                blue_best_gain=blue_responses[best_b].gain,
                red_best_gain=red_responses[best_r].gain,
                value=value,
                exploitability=expl,
                new_cells=cells,
                blue_added=len(new_blue),
                red_added=len(new_red),
                cumulative_evaluations=self.eg.total_evaluations(),
                blue_mixture=tuple(solution.blue_mixture.weights),
                red_mixture=tuple(solution.red_mixture.weights),
                ptm_choices=tuple(r.ptm_label for r in blue_responses + red_responses
                                  if r.ptm_label is not None),
                epsilon_ptm=self._current_ptm_epsilon(),
                combined_std_error=combined_std,
                effective_epsilon=effective,
            ))

            if terminal:
                termination = EPSILON_RBNE
                break
            if new_blue or new_red:
                solution = self.eg.solve()

        return RunTrace(records, self.eg, solution, termination,
                        self.blue_vfs, self.red_vfs)

    def _dedupe(self, player: str, responses: list[_Response]) -> list[_Response]:
        fresh: list[_Response] = []
        for r in responses:
            if self.eg.find_duplicate(r.policy) is not None:
                continue
            if any(r.policy.same_table(f.policy) for f in fresh):
                continue
            fresh.append(r)
        return fresh

    def _current_ptm_epsilon(self) -> float | None:
        for oc in self.blue_oracles + self.red_oracles:
            if oc.ptm is not None:
                return oc.ptm.current_epsilon
        return None


def run_mro(game: MarkovGame, blue_oracles: list[OracleConfig],
            red_oracles: list[OracleConfig], cfg: LoopConfig) -> RunTrace:
    """Multi-oracle training: every oracle responds each iteration and all
    non-duplicate responses augment the empirical game."""
    return _Runner(game, blue_oracles, red_oracles, cfg).run()


def run_ado(game: MarkovGame, blue_oracle: OracleConfig, red_oracle: OracleConfig,
            cfg: LoopConfig) -> RunTrace:
    """Classic double-oracle training: one response oracle per player."""
    return run_mro(game, [blue_oracle], [red_oracle], cfg)


def recheck_equilibrium(game: MarkovGame, trace: RunTrace,
                        blue_oracles: list[OracleConfig],
                        red_oracles: list[OracleConfig],
                        cfg: LoopConfig) -> float:
    """Re-invoke the oracles against a finished run's final mixtures and
    return the combined improvement (the termination-soundness quantity)."""
    runner = _Runner(game, blue_oracles, red_oracles, cfg)
    runner.eg = trace.empirical
    runner.blue_vfs = list(trace.blue_value_tables)
    runner.red_vfs = list(trace.red_value_tables)
    runner.evaluator = trace.empirical.evaluator
    iteration = trace.iterations + 1
    blue = [runner.respond(BLUE, i, oc, trace.solution, iteration)
            for i, oc in enumerate(runner.blue_oracles)]
    red = [runner.respond(RED, i, oc, trace.solution, iteration)
           for i, oc in enumerate(runner.red_oracles)]
    value = trace.solution.value
    return (max(r.gain for r in blue) - value) + (max(r.gain for r in red) + value)
