"""Evaluator backends shared by the empirical game and the response loop.

Both backends report Blue-signed :class:`~mrogames.game.EvaluationResult`
values.  The exact backend evaluates a policy against a mixture through
linearity (the mixture-weighted sum of pairwise exact evaluations, which
matches per-episode opponent sampling).  The Monte Carlo backend samples
one opponent policy per episode from the mixture.

Every Monte Carlo stream is derived from ``(base_seed, purpose, ids...)``
so cells and gains are reproducible regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np

from . import game as game_mod
from ._util import stable_seed
from .errors import InvalidArgumentError
from .game import EvaluationResult, MarkovGame, Mixture, TabularPolicy


class ExactEvaluator:
    kind = "exact"

    def __init__(self):
        self.pair_calls = 0

    def signature(self) -> tuple:
        return ("exact",)

    def pair(self, game: MarkovGame, blue: TabularPolicy, red: TabularPolicy,
             blue_id: int = 0, red_id: int = 0) -> EvaluationResult:
        self.pair_calls += 1
        return game_mod.evaluate_exact(game, blue, red)

    def vs_mixture(self, game: MarkovGame, policy: TabularPolicy,
                   opp_policies: list[TabularPolicy], opp_mixture: Mixture,
                   tag: str = "") -> EvaluationResult:
        if len(opp_policies) != len(opp_mixture):
            raise InvalidArgumentError(
                f"mixture has {len(opp_mixture)} weights for {len(opp_policies)} policies"
            )
        mean = 0.0
        for w, opp in zip(opp_mixture.weights, opp_policies):
            if w == 0.0:
                continue
            if policy.player == game_mod.BLUE:
                cell = self.pair(game, policy, opp)
            else:
                cell = self.pair(game, opp, policy)
            mean += w * cell.mean_gain_blue
        return EvaluationResult(mean, 0.0, 1, 0, True)


class MonteCarloEvaluator:
    kind = "monte-carlo"

    def __init__(self, episodes: int, base_seed: int):
        if episodes < 1:
            raise InvalidArgumentError(f"episodes must be >= 1, got {episodes}")
        self.episodes = int(episodes)
        self.base_seed = int(base_seed)
        self.pair_calls = 0

    def signature(self) -> tuple:
        return ("monte-carlo", self.episodes, self.base_seed)

    def pair(self, game: MarkovGame, blue: TabularPolicy, red: TabularPolicy,
             blue_id: int = 0, red_id: int = 0) -> EvaluationResult:
        self.pair_calls += 1
        seed = stable_seed(self.base_seed, "cell", blue_id, red_id)
        return game_mod.evaluate_monte_carlo(game, blue, red, self.episodes, seed)

    def vs_mixture(self, game: MarkovGame, policy: TabularPolicy,
                   opp_policies: list[TabularPolicy], opp_mixture: Mixture,
                   tag: str = "") -> EvaluationResult:
        if len(opp_policies) != len(opp_mixture):
            raise InvalidArgumentError(
                f"mixture has {len(opp_mixture)} weights for {len(opp_policies)} policies"
            )
        seed = stable_seed(self.base_seed, "vs-mixture", tag)
        cum = np.cumsum(opp_mixture.weights)
        returns = np.empty(self.episodes)
        for e in range(self.episodes):
            rng = np.random.default_rng([seed, e])
            opp = opp_policies[int(np.searchsorted(cum, rng.random(), side="right"))]
            if policy.player == game_mod.BLUE:
                returns[e] = game_mod.rollout_return(game, policy.table, opp.table, rng)
            else:
                returns[e] = game_mod.rollout_return(game, opp.table, policy.table, rng)
        mean = float(returns.mean())
        std = float(returns.std(ddof=1) / np.sqrt(self.episodes)) if self.episodes > 1 else 0.0
        return EvaluationResult(mean, std, self.episodes, seed, False)


Evaluator = ExactEvaluator | MonteCarloEvaluator
