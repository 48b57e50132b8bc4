"""Finite two-player zero-sum Markov games and tabular policies.

A game is stored in a compiled sparse form: for every (state, blue action,
red action) triple there is one contiguous segment of successor entries
(next state, probability, Blue reward).  Red's reward is the negation of
Blue's by construction.  All evaluation routines operate on these flat
arrays so that games with a few hundred thousand triples stay fast.

Horizon semantics: a finite horizon is evaluated undiscounted (the
discount only enters learning oracles' own objectives); horizon ``None``
means discounted-infinite evaluation and requires ``discount < 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidArgumentError,
    UnsupportedConfigurationError,
)
from ._util import PROB_TOL

BLUE = "blue"
RED = "red"

# episodes of discounted-infinite games are truncated once the discount
# factor has decayed below this weight
_MC_TAIL = 1e-16


def _check_player(player: str) -> str:
    if player not in (BLUE, RED):
        raise InvalidArgumentError(f"player must be 'blue' or 'red', got {player!r}")
    return player


def _validate_distribution(name: str, vec: np.ndarray) -> None:
    if vec.ndim != 1:
        raise DimensionMismatchError(f"{name} must be a vector, got shape {vec.shape}")
    if np.any(vec < -PROB_TOL):
        idx = int(np.argmin(vec))
        raise InvalidArgumentError(f"{name}[{idx}] = {vec[idx]} is negative")
    total = float(vec.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise InvalidArgumentError(f"{name} sums to {total!r}, expected 1 within {PROB_TOL}")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PolicyMetadata:
    """Provenance of a policy: which oracle produced it and when."""

    oracle: str = "manual"
    iteration: int = 0
    ptm_initialized: bool = False
    shaped: bool = False

    def label(self) -> str:
        return f"{self.oracle}@{self.iteration}"


@dataclass(frozen=True)
class TabularPolicy:
    """A state-conditioned action distribution for one player.

    ``table`` has one row per state; each row is a probability vector over
    that player's actions (sums to 1 within 1e-12, elementwise nonnegative).
    """

    table: np.ndarray
    player: str
    metadata: PolicyMetadata = field(default_factory=PolicyMetadata)

    def __post_init__(self):
        _check_player(self.player)
        table = _frozen_array(self.table, np.float64)
        if table.ndim != 2:
            raise DimensionMismatchError(
                f"policy table must be 2-D (states x actions), got shape {table.shape}"
            )
        row_sums = table.sum(axis=1)
        bad = np.nonzero(np.abs(row_sums - 1.0) > PROB_TOL)[0]
        if bad.size:
            s = int(bad[0])
            raise InvalidArgumentError(
                f"policy row {s} sums to {row_sums[s]!r}, expected 1 within {PROB_TOL}"
            )
        if np.any(table < -PROB_TOL):
            s, a = np.unravel_index(int(np.argmin(table)), table.shape)
            raise InvalidArgumentError(f"policy entry ({s}, {a}) is negative")
        object.__setattr__(self, "table", table)

    @property
    def state_count(self) -> int:
        return self.table.shape[0]

    @property
    def action_count(self) -> int:
        return self.table.shape[1]

    def same_table(self, other: "TabularPolicy", tol: float = 1e-12) -> bool:
        return (
            self.player == other.player
            and self.table.shape == other.table.shape
            and bool(np.allclose(self.table, other.table, rtol=0.0, atol=tol))
        )

    @staticmethod
    def uniform(state_count: int, action_count: int, player: str,
                metadata: PolicyMetadata | None = None) -> "TabularPolicy":
        table = np.full((state_count, action_count), 1.0 / action_count)
        return TabularPolicy(table, player, metadata or PolicyMetadata(oracle="uniform"))

    @staticmethod
    def pure(state_count: int, action_count: int, action: int, player: str,
             metadata: PolicyMetadata | None = None) -> "TabularPolicy":
        if not 0 <= action < action_count:
            raise InvalidArgumentError(f"action {action} out of range 0..{action_count - 1}")
        table = np.zeros((state_count, action_count))
        table[:, action] = 1.0
        return TabularPolicy(table, player, metadata or PolicyMetadata(oracle="pure"))

    @staticmethod
    def deterministic(actions: np.ndarray, action_count: int, player: str,
                      metadata: PolicyMetadata | None = None) -> "TabularPolicy":
        actions = np.asarray(actions, dtype=np.int64)
        table = np.zeros((actions.shape[0], action_count))
        table[np.arange(actions.shape[0]), actions] = 1.0
        return TabularPolicy(table, player, metadata or PolicyMetadata())


@dataclass(frozen=True)
class Mixture:
    """A probability weighting over a player's registered policies."""

    weights: np.ndarray
    player: str

    def __post_init__(self):
        _check_player(self.player)
        weights = _frozen_array(self.weights, np.float64)
        _validate_distribution("mixture weights", weights)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.weights.shape[0]

    def support(self, tol: float = 1e-6) -> np.ndarray:
        return np.nonzero(self.weights > tol)[0]

    @staticmethod
    def singleton(size: int, index: int, player: str) -> "Mixture":
        w = np.zeros(size)
        w[index] = 1.0
        return Mixture(w, player)

    @staticmethod
    def uniform(size: int, player: str) -> "Mixture":
        return Mixture(np.full(size, 1.0 / size), player)


@dataclass(frozen=True)
class EvaluationResult:
    """Blue's gain for one joint-policy evaluation.

    ``exact_flag`` implies ``std_error == 0`` and that ``episode_count``
    carries no information.  Red's gain is always the negation.
    """

    mean_gain_blue: float
    std_error: float
    episode_count: int
    seed: int
    exact_flag: bool

    def gain(self, player: str) -> float:
        _check_player(player)
        return self.mean_gain_blue if player == BLUE else -self.mean_gain_blue


class MarkovGame:
    """A finite two-player zero-sum stochastic game in compiled sparse form.

    Every (s, aB, aR) triple owns one segment ``succ_offsets[t]:succ_offsets[t+1]``
    of the flat successor arrays, with ``t = (s * AB + aB) * AR + aR``.
    Instances are immutable after construction.
    """

    def __init__(self, state_count: int, blue_action_count: int, red_action_count: int,
                 succ_offsets: np.ndarray, succ_state: np.ndarray, succ_prob: np.ndarray,
                 succ_reward: np.ndarray, discount: float, horizon: int | None,
                 initial_distribution: np.ndarray):
        if state_count < 1 or blue_action_count < 1 or red_action_count < 1:
            raise InvalidArgumentError("state and action counts must be positive")
        if not 0.0 < discount <= 1.0:
            raise InvalidArgumentError(f"discount must be in (0, 1], got {discount}")
        if horizon is None:
            if discount >= 1.0:
                raise UnsupportedConfigurationError(
                    "discounted-infinite horizon requires discount < 1"
                )
        elif int(horizon) < 1:
            raise InvalidArgumentError(f"finite horizon must be >= 1, got {horizon}")

        self.state_count = int(state_count)
        self.blue_action_count = int(blue_action_count)
        self.red_action_count = int(red_action_count)
        self.discount = float(discount)
        self.horizon = None if horizon is None else int(horizon)
        self.initial_distribution = _frozen_array(initial_distribution, np.float64)
        self.succ_offsets = _frozen_array(succ_offsets, np.int64)
        self.succ_state = _frozen_array(succ_state, np.int64)
        self.succ_prob = _frozen_array(succ_prob, np.float64)
        self.succ_reward = _frozen_array(succ_reward, np.float64)
        self._validate()

    def _validate(self) -> None:
        triples = self.state_count * self.blue_action_count * self.red_action_count
        if self.succ_offsets.shape != (triples + 1,):
            raise DimensionMismatchError(
                f"succ_offsets must have length {triples + 1}, got {self.succ_offsets.shape}"
            )
        counts = np.diff(self.succ_offsets)
        if np.any(counts < 1):
            t = int(np.argmin(counts))
            raise InvalidArgumentError(
                f"transition triple {self._triple_of(t)} has no successor entries"
            )
        if self.succ_state.shape != self.succ_prob.shape or \
                self.succ_prob.shape != self.succ_reward.shape:
            raise DimensionMismatchError("flat successor arrays must share one shape")
        if np.any(self.succ_state < 0) or np.any(self.succ_state >= self.state_count):
            raise InvalidArgumentError("successor state index out of range")
        if np.any(self.succ_prob < -PROB_TOL):
            raise InvalidArgumentError("negative transition probability")
        sums = np.add.reduceat(self.succ_prob, self.succ_offsets[:-1])
        bad = np.nonzero(np.abs(sums - 1.0) > PROB_TOL)[0]
        if bad.size:
            t = int(bad[0])
            raise InvalidArgumentError(
                f"transition probabilities for {self._triple_of(t)} sum to {sums[t]!r}"
            )
        if not np.all(np.isfinite(self.succ_reward)):
            raise InvalidArgumentError("rewards must be finite")
        _validate_distribution("initial_distribution", self.initial_distribution)
        if self.initial_distribution.shape[0] != self.state_count:
            raise DimensionMismatchError(
                f"initial_distribution has length {self.initial_distribution.shape[0]}, "
                f"expected {self.state_count}"
            )

    def _triple_of(self, t: int) -> tuple[int, int, int]:
        s, rem = divmod(t, self.blue_action_count * self.red_action_count)
        a_b, a_r = divmod(rem, self.red_action_count)
        return s, a_b, a_r

    @property
    def action_counts(self) -> tuple[int, int]:
        return self.blue_action_count, self.red_action_count

    def action_count(self, player: str) -> int:
        _check_player(player)
        return self.blue_action_count if player == BLUE else self.red_action_count

    @property
    def evaluation_discount(self) -> float:
        """Discount used for evaluation: 1 when the horizon is finite."""
        return 1.0 if self.horizon is not None else self.discount

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.succ_prob < PROB_TOL) | (self.succ_prob > 1.0 - PROB_TOL)))

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def from_dense(transition: np.ndarray, reward_blue: np.ndarray, discount: float,
                   horizon: int | None, initial_distribution: np.ndarray) -> "MarkovGame":
        """Build from dense (S, AB, AR, S) transition and reward arrays."""
        transition = np.asarray(transition, dtype=np.float64)
        reward_blue = np.asarray(reward_blue, dtype=np.float64)
        if transition.ndim != 4:
            raise DimensionMismatchError(
                f"dense transition must be 4-D, got shape {transition.shape}"
            )
        if reward_blue.shape != transition.shape:
            raise DimensionMismatchError(
                f"reward shape {reward_blue.shape} != transition shape {transition.shape}"
            )
        s_n, a_b, a_r, _ = transition.shape
        flat_p = transition.reshape(-1, s_n)
        keep = flat_p > 0.0
        counts = keep.sum(axis=1)
        if np.any(counts == 0):
            t = int(np.argmin(counts))
            raise InvalidArgumentError(f"transition row {t} is all zero")
        offsets = np.concatenate(([0], np.cumsum(counts)))
        rows, cols = np.nonzero(keep)
        return MarkovGame(
            s_n, a_b, a_r, offsets, cols, flat_p[rows, cols],
            reward_blue.reshape(-1, s_n)[rows, cols],
            discount, horizon, initial_distribution,
        )

    @staticmethod
    def from_tables(state_count: int, action_counts: tuple[int, int],
                    transitions: Mapping[tuple[int, int, int], Iterable[tuple[int, float]]],
                    rewards: Mapping[tuple[int, int, int, int], float],
                    discount: float, horizon: int | None,
                    initial_distribution: np.ndarray) -> "MarkovGame":
        """Build from sparse entry maps; absent triples default to a
        zero-reward self-loop."""
        a_b, a_r = action_counts
        offsets = [0]
        states: list[int] = []
        probs: list[float] = []
        rews: list[float] = []
        for s in range(state_count):
            for b in range(a_b):
                for r in range(a_r):
                    entries = sorted(transitions.get((s, b, r), [(s, 1.0)]))
                    for s2, p in entries:
                        states.append(s2)
                        probs.append(p)
                        rews.append(rewards.get((s, b, r, s2), 0.0))
                    offsets.append(offsets[-1] + len(entries))
        return MarkovGame(
            state_count, a_b, a_r, np.asarray(offsets), np.asarray(states),
            np.asarray(probs, dtype=np.float64), np.asarray(rews, dtype=np.float64),
            discount, horizon, initial_distribution,
        )

    # -- evaluation kernels ----------------------------------------------

    def cell_values(self, v_next: np.ndarray, gamma: float) -> np.ndarray:
        """Per-triple expected one-step value, shaped (S, AB, AR).

        Entry (s, aB, aR) is E[r + gamma * v_next(s')] for that triple.
        """
        contrib = self.succ_prob * (self.succ_reward + gamma * v_next[self.succ_state])
        q = np.add.reduceat(contrib, self.succ_offsets[:-1])
        return q.reshape(self.state_count, self.blue_action_count, self.red_action_count)

    def check_policy(self, policy: TabularPolicy) -> None:
        expect = (self.state_count, self.action_count(policy.player))
        if policy.table.shape != expect:
            raise DimensionMismatchError(
                f"{policy.player} policy table has shape {policy.table.shape}, "
                f"game expects {expect}"
            )


_DENSE_SOLVE_CAP = 4096


def evaluate_exact(game: MarkovGame, blue: TabularPolicy, red: TabularPolicy) -> EvaluationResult:
    """Exact expected Blue return of the joint policy.

    Finite horizon: undiscounted backward induction.  Discounted-infinite:
    solves the linear policy-evaluation system (dense, so the state space
    is capped at a few thousand states).
    """
    game.check_policy(blue)
    game.check_policy(red)
    if game.horizon is None and game.discount >= 1.0:
        raise UnsupportedConfigurationError("discounted-infinite requires discount < 1")
    if game.horizon is None and game.state_count > _DENSE_SOLVE_CAP:
        raise UnsupportedConfigurationError(
            f"discounted-infinite exact evaluation solves a dense linear system; "
            f"{game.state_count} states exceeds the {_DENSE_SOLVE_CAP}-state bound"
        )

    if game.horizon is not None:
        v = np.zeros(game.state_count)
        for _ in range(game.horizon):
            q = game.cell_values(v, 1.0)
            v = np.einsum("sbr,sb,sr->s", q, blue.table, red.table)
    else:
        # (I - gamma * P_pi) v = r_pi with the joint policy folded in
        triples = game.state_count * game.blue_action_count * game.red_action_count
        entry_triple = np.repeat(np.arange(triples), np.diff(game.succ_offsets))
        w = np.einsum("sb,sr->sbr", blue.table, red.table).reshape(-1)
        entry_w = w[entry_triple] * game.succ_prob
        entry_src = entry_triple // (game.blue_action_count * game.red_action_count)
        p_pi = np.zeros((game.state_count, game.state_count))
        np.add.at(p_pi, (entry_src, game.succ_state), entry_w)
        r_pi = np.bincount(entry_src, weights=entry_w * game.succ_reward,
                           minlength=game.state_count)
        lhs = np.eye(game.state_count) - game.discount * p_pi
        v = np.linalg.solve(lhs, r_pi)

    mean = float(game.initial_distribution @ v)
    return EvaluationResult(mean, 0.0, 1, 0, True)


def _episode_cap(game: MarkovGame) -> int:
    if game.horizon is not None:
        return game.horizon
    return int(np.ceil(np.log(_MC_TAIL) / np.log(game.discount)))


def _sample_index(cum: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cum, u, side="right"))


def rollout_return(game: MarkovGame, blue_table: np.ndarray, red_table: np.ndarray,
                   rng: np.random.Generator) -> float:
    """Blue's return for one seeded episode."""
    cum_init = np.cumsum(game.initial_distribution)
    cum_blue = np.cumsum(blue_table, axis=1)
    cum_red = np.cumsum(red_table, axis=1)
    gamma = game.evaluation_discount
    steps = _episode_cap(game)

    s = _sample_index(cum_init, rng.random())
    total = 0.0
    weight = 1.0
    for _ in range(steps):
        a_b = _sample_index(cum_blue[s], rng.random())
        a_r = _sample_index(cum_red[s], rng.random())
        t = (s * game.blue_action_count + a_b) * game.red_action_count + a_r
        lo, hi = game.succ_offsets[t], game.succ_offsets[t + 1]
        if hi - lo == 1:
            k = lo
        else:
            cum = np.cumsum(game.succ_prob[lo:hi])
            k = lo + _sample_index(cum, rng.random() * cum[-1])
        total += weight * game.succ_reward[k]
        weight *= gamma
        s = int(game.succ_state[k])
    return total


def evaluate_monte_carlo(game: MarkovGame, blue: TabularPolicy, red: TabularPolicy,
                         episodes: int, seed: int) -> EvaluationResult:
    """Sample mean and standard error of Blue's return over seeded episodes.

    Episode ``e`` draws its stream from ``(seed, e)``, so results are
    independent of evaluation order and bit-identical across repeat calls.
    """
    if episodes < 1:
        raise InvalidArgumentError(f"episodes must be >= 1, got {episodes}")
    game.check_policy(blue)
    game.check_policy(red)
    returns = np.empty(episodes)
    for e in range(episodes):
        rng = np.random.default_rng([seed, e])
        returns[e] = rollout_return(game, blue.table, red.table, rng)
    mean = float(returns.mean())
    std_error = float(returns.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0
    return EvaluationResult(mean, std_error, episodes, seed, False)


@dataclass(frozen=True)
class Mdp:
    """A single-player decision problem (one segment per (s, a) pair).

    Rewards are expressed for the acting ``player``, so best responses
    always maximize.  Produced by :func:`induce_decision_problem` or built
    directly for tests via :meth:`from_dense`.
    """

    state_count: int
    action_count: int
    succ_offsets: np.ndarray
    succ_state: np.ndarray
    succ_prob: np.ndarray
    succ_reward: np.ndarray
    discount: float
    horizon: int | None
    initial_distribution: np.ndarray
    player: str = BLUE

    def __post_init__(self):
        _check_player(self.player)
        for name in ("succ_offsets", "succ_state"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), np.int64))
        for name in ("succ_prob", "succ_reward", "initial_distribution"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), np.float64))
        if not np.all(np.isfinite(self.succ_reward)):
            raise InvalidArgumentError("rewards must be finite")
        if self.horizon is None and self.discount >= 1.0:
            raise UnsupportedConfigurationError(
                "discounted-infinite horizon requires discount < 1"
            )

    @property
    def evaluation_discount(self) -> float:
        return 1.0 if self.horizon is not None else self.discount

    @staticmethod
    def from_dense(transition: np.ndarray, reward: np.ndarray, discount: float,
                   horizon: int | None, initial_distribution: np.ndarray,
                   player: str = BLUE) -> "Mdp":
        """Build from dense (S, A, S) arrays."""
        transition = np.asarray(transition, dtype=np.float64)
        reward = np.asarray(reward, dtype=np.float64)
        s_n, a_n, _ = transition.shape
        flat_p = transition.reshape(-1, s_n)
        keep = flat_p > 0.0
        counts = keep.sum(axis=1)
        if np.any(counts == 0):
            raise InvalidArgumentError("every (state, action) needs a successor")
        offsets = np.concatenate(([0], np.cumsum(counts)))
        rows, cols = np.nonzero(keep)
        return Mdp(s_n, a_n, offsets, cols, flat_p[rows, cols],
                   reward.reshape(-1, s_n)[rows, cols],
                   discount, horizon, np.asarray(initial_distribution, dtype=np.float64),
                   player)

    def entry_sources(self) -> np.ndarray:
        """Source state of each flat successor entry."""
        pairs = np.repeat(np.arange(self.state_count * self.action_count),
                          np.diff(self.succ_offsets))
        return pairs // self.action_count

    def q_values(self, v_next: np.ndarray, gamma: float) -> np.ndarray:
        contrib = self.succ_prob * (self.succ_reward + gamma * v_next[self.succ_state])
        q = np.add.reduceat(contrib, self.succ_offsets[:-1])
        return q.reshape(self.state_count, self.action_count)

    def with_shaped_rewards(self, potential: np.ndarray, tau: float,
                            gamma_phi: float) -> "Mdp":
        """Same dynamics with rewards shifted by the potential difference."""
        potential = np.asarray(potential, dtype=np.float64)
        shaped = self.succ_reward + tau * (
            gamma_phi * potential[self.succ_state] - potential[self.entry_sources()]
        )
        return replace(self, succ_reward=shaped)


def fold_mixture(policies: list[TabularPolicy], mixture: Mixture) -> np.ndarray:
    """Mixture-weighted per-state action distribution of the components."""
    if len(mixture) == 0:
        raise InvalidArgumentError("mixture is empty")
    if len(policies) != len(mixture):
        raise DimensionMismatchError(
            f"mixture has {len(mixture)} weights for {len(policies)} policies"
        )
    folded = np.zeros_like(policies[0].table)
    for w, pol in zip(mixture.weights, policies):
        if w != 0.0:
            folded += w * pol.table
    return folded


def induce_decision_problem(game: MarkovGame, opponent_mixture: Mixture,
                            opponent_policies: list[TabularPolicy],
                            player: str) -> Mdp:
    """Fold an opponent mixture into the environment (behavioral fold).

    At every state the opponent's action distribution is the
    mixture-weighted average of the component policies' distributions;
    transitions and rewards are marginalized accordingly.  Exact for
    singleton mixtures and one-step games; for non-singleton mixtures of
    multi-step games it approximates per-episode opponent sampling.
    """
    _check_player(player)
    opponent = RED if player == BLUE else BLUE
    for pol in opponent_policies:
        if pol.player != opponent:
            raise InvalidArgumentError(
                f"opponent policy belongs to {pol.player}, expected {opponent}"
            )
        game.check_policy(pol)
    folded = fold_mixture(opponent_policies, opponent_mixture)

    a_b, a_r = game.blue_action_count, game.red_action_count
    triples = game.state_count * a_b * a_r
    entry_triple = np.repeat(np.arange(triples), np.diff(game.succ_offsets))
    s_of = entry_triple // (a_b * a_r)
    ab_of = (entry_triple // a_r) % a_b
    ar_of = entry_triple % a_r

    if player == BLUE:
        own_action, opp_action, own_count = ab_of, ar_of, a_b
        sign = 1.0
    else:
        own_action, opp_action, own_count = ar_of, ab_of, a_r
        sign = -1.0

    weight = folded[s_of, opp_action] * game.succ_prob
    key = (s_of * own_count + own_action) * game.state_count + game.succ_state
    order = np.argsort(key, kind="stable")
    key, weight = key[order], weight[order]
    reward_w = weight * game.succ_reward[order] * sign

    uniq, starts = np.unique(key, return_index=True)
    prob = np.add.reduceat(weight, starts)
    rew = np.add.reduceat(reward_w, starts)
    keep = prob > 0.0
    uniq, prob, rew = uniq[keep], prob[keep], rew[keep]
    rew = rew / prob

    pair_of = uniq // game.state_count
    counts = np.bincount(pair_of, minlength=game.state_count * own_count)
    if np.any(counts == 0):
        raise InvalidArgumentError("induced problem lost a (state, action) pair")
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return Mdp(game.state_count, own_count, offsets, uniq % game.state_count,
               prob, rew, game.discount, game.horizon,
               game.initial_distribution, player)
