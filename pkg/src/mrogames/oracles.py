"""Best-response oracles: exact value iteration and tabular Q-learning,
with value-function potential shaping and warm-start sampling.

Shaping follows F(s, s') = tau * (gamma_phi * Phi(s') - Phi(s)) where the
potential is a mixture-weighted sum of Z-score-normalized value tables
from earlier responses.  Setting gamma_phi equal to the learner's
discount keeps greedy policies invariant; the undiscounted default
(gamma_phi = 1) rewards any move up the potential and penalizes the
reverse move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._util import rng_for
from .errors import (
    DimensionMismatchError,
    InvalidArgumentError,
    InvalidStateError,
)
from .game import (
    BLUE,
    RED,
    MarkovGame,
    Mdp,
    Mixture,
    PolicyMetadata,
    TabularPolicy,
    fold_mixture,
)


@dataclass(frozen=True)
class ValueFunctionTable:
    """Per-state value estimates left behind by a response oracle."""

    values: np.ndarray
    origin: tuple[str, int] = ("manual", 0)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("value table entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


def zscore_normalize(vf: ValueFunctionTable) -> ValueFunctionTable:
    """Normalize to mean 0 and population standard deviation 1.

    A constant table degenerates to identically zero instead of dividing
    by zero.
    """
    if len(vf) == 0:
        raise InvalidArgumentError("cannot normalize an empty value table")
    mean = float(vf.values.mean())
    std = float(vf.values.std())
    if std <= 1e-15 * max(1.0, float(np.abs(vf.values).max())):
        return ValueFunctionTable(np.zeros_like(vf.values), vf.origin)
    return ValueFunctionTable((vf.values - mean) / std, vf.origin)


def ensemble_potential_table(vfs: Sequence[ValueFunctionTable],
                             weights: Mixture) -> np.ndarray:
    """Weighted sum of Z-scored value tables, as a per-state array."""
    if len(vfs) != len(weights):
        raise DimensionMismatchError(
            f"{len(weights)} weights for {len(vfs)} value tables"
        )
    if not vfs:
        raise InvalidArgumentError("ensemble needs at least one value table")
    total = np.zeros(len(vfs[0]))
    for w, vf in zip(weights.weights, vfs):
        if w == 0.0:
            continue
        total += w * zscore_normalize(vf).values
    return total


def ensemble_potential(vfs: Sequence[ValueFunctionTable], weights: Mixture,
                       state: int) -> float:
    return float(ensemble_potential_table(vfs, weights)[state])


@dataclass(frozen=True)
class ShapingConfig:
    """Potential-shaping parameters.  Normalization is Z-score, fixed."""

    tau: float = 1.0
    gamma_phi: float = 1.0
    mode: str = "off"  # off | single | ensemble
    vf_index: int | None = None

    def __post_init__(self):
        if self.tau < 0.0:
            raise InvalidArgumentError(f"tau must be nonnegative, got {self.tau}")
        if not 0.0 < self.gamma_phi <= 1.0:
            raise InvalidArgumentError(f"gamma_phi must be in (0, 1], got {self.gamma_phi}")
        if self.mode not in ("off", "single", "ensemble"):
            raise InvalidArgumentError(f"unknown shaping mode {self.mode!r}")
        if self.mode == "single" and self.vf_index is None:
            raise InvalidArgumentError("shaping mode 'single' requires vf_index")

    @property
    def active(self) -> bool:
        return self.mode != "off" and self.tau != 0.0


def shaped_reward(r: float, s: int, s_next: int,
                  potential: Callable[[int], float], cfg: ShapingConfig) -> float:
    """r + tau * (gamma_phi * Phi(s') - Phi(s)); the base reward when off."""
    if not cfg.active:
        return r
    return r + cfg.tau * (cfg.gamma_phi * potential(s_next) - potential(s))


@dataclass
class PtmSampler:
    """Epsilon-greedy chooser between exploratory and warm-start inits.

    ``epsilon`` is the initial exploration probability; one decay step is
    applied per response iteration, so after k decays the probability is
    ``decay**k * epsilon``.
    """

    epsilon: float = 1.0
    decay: float = 0.95
    generalist: TabularPolicy | None = None
    rng_seed: int = 0
    decay_count: int = field(default=0, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidArgumentError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.decay < 1.0:
            raise InvalidArgumentError(f"decay must be in [0, 1), got {self.decay}")

    @property
    def current_epsilon(self) -> float:
        return self.epsilon * self.decay ** self.decay_count

    def decay_step(self) -> None:
        self.decay_count += 1


@dataclass(frozen=True)
class PtmChoice:
    kind: str  # fresh | generalist | registry
    index: int | None = None

    def label(self) -> str:
        return self.kind if self.index is None else f"{self.kind}[{self.index}]"


def sample_ptm(sampler: PtmSampler, registry: Sequence[TabularPolicy],
               mixture: Mixture, rng: np.random.Generator) -> PtmChoice:
    """Pick an initialization: explore with probability epsilon, else
    sample a registry index with its mixture weight."""
    eps = sampler.current_epsilon
    if not registry and eps == 0.0:
        raise InvalidStateError("empty registry with epsilon 0: nothing to sample")
    if len(registry) != len(mixture):
        raise DimensionMismatchError(
            f"mixture has {len(mixture)} weights for {len(registry)} policies"
        )
    if rng.random() < eps:
        if sampler.generalist is not None:
            return PtmChoice("generalist")
        return PtmChoice("fresh")
    if not registry:
        raise InvalidStateError("greedy branch chosen but the registry is empty")
    cum = np.cumsum(mixture.weights)
    return PtmChoice("registry", int(np.searchsorted(cum, rng.random(), side="right")))


# -- exact best responses --------------------------------------------------


def optimal_values(mdp: Mdp, vi_tolerance: float) -> tuple[np.ndarray, np.ndarray]:
    """Optimal V and Q of a decision problem.

    Finite horizon: exact backward induction (undiscounted).  Otherwise
    value iteration on the discounted problem until the sup-norm residual
    is at most ``vi_tolerance``; iteration actually continues a little
    past that (by the discount-dependent contraction margin) so the
    returned V and Q themselves are within ``vi_tolerance`` of optimal.
    """
    if vi_tolerance <= 0.0:
        raise InvalidArgumentError(f"vi_tolerance must be positive, got {vi_tolerance}")
    v = np.zeros(mdp.state_count)
    if mdp.horizon is not None:
        for _ in range(mdp.horizon):
            q = mdp.q_values(v, 1.0)
            v = q.max(axis=1)
        return v, q
    gamma = mdp.discount
    target = vi_tolerance * min(1.0, (1.0 - gamma) / (2.0 * gamma))
    while True:
        q = mdp.q_values(v, gamma)
        v_new = q.max(axis=1)
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residual <= target:
            return v, q


def exact_best_response(mdp: Mdp, vi_tolerance: float = 1e-10,
                        ) -> tuple[TabularPolicy, ValueFunctionTable]:
    """Best response to the induced problem, greedy w.r.t. the final value
    table with ties broken by lowest action index."""
    v, q = optimal_values(mdp, vi_tolerance)
    actions = np.argmax(q, axis=1)
    policy = TabularPolicy.deterministic(actions, mdp.action_count, mdp.player,
                                         PolicyMetadata(oracle="exact-vi"))
    return policy, ValueFunctionTable(v, origin=("exact-vi", 0))


# -- tabular Q-learning ------------------------------------------------------


class MdpRolloutEnv:
    """Sampled-episode interface over a decision problem."""

    def __init__(self, mdp: Mdp):
        self.mdp = mdp
        self.state_count = mdp.state_count
        self.action_count = mdp.action_count
        self.discount = mdp.discount
        self.evaluation_discount = mdp.evaluation_discount
        self.max_episode_steps = mdp.horizon if mdp.horizon is not None else \
            max(1, int(math.ceil(math.log(1e-6) / math.log(mdp.discount))))
        self._cum_init = np.cumsum(mdp.initial_distribution)
        self._t = 0
        self._state = 0

    def clone(self) -> "MdpRolloutEnv":
        return MdpRolloutEnv(self.mdp)

    def reset(self, rng: np.random.Generator) -> int:
        self._t = 0
        self._state = int(np.searchsorted(self._cum_init, rng.random(), side="right"))
        return self._state

    def step(self, action: int, rng: np.random.Generator) -> tuple[int, float, bool]:
        mdp = self.mdp
        pair = self._state * mdp.action_count + action
        lo, hi = mdp.succ_offsets[pair], mdp.succ_offsets[pair + 1]
        if hi - lo == 1:
            k = lo
        else:
            cum = np.cumsum(mdp.succ_prob[lo:hi])
            k = lo + int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        self._state = int(mdp.succ_state[k])
        self._t += 1
        return self._state, float(mdp.succ_reward[k]), self._t >= self.max_episode_steps


class MixtureRolloutEnv:
    """Game environment for one player; the opponent's policy is drawn from
    the mixture once per episode (the ground-truth mixture semantics).

    An optional ``observe`` hook maps the true state to the index the
    learner sees (per-player observation noise for the Q-learning path).
    """

    def __init__(self, game: MarkovGame, player: str,
                 opp_policies: Sequence[TabularPolicy], opp_mixture: Mixture,
                 observe: Callable[[int, np.random.Generator], int] | None = None):
        if len(opp_policies) != len(opp_mixture):
            raise DimensionMismatchError(
                f"mixture has {len(opp_mixture)} weights for {len(opp_policies)} policies"
            )
        self.game = game
        self.player = player
        self.opp_policies = list(opp_policies)
        self.opp_mixture = opp_mixture
        self.observe = observe
        self.state_count = game.state_count
        self.action_count = game.action_count(player)
        self.discount = game.discount
        self.evaluation_discount = game.evaluation_discount
        self.max_episode_steps = game.horizon if game.horizon is not None else \
            max(1, int(math.ceil(math.log(1e-6) / math.log(game.discount))))
        self._cum_init = np.cumsum(game.initial_distribution)
        self._cum_mix = np.cumsum(opp_mixture.weights)
        self._opp_cum_tables = [np.cumsum(p.table, axis=1) for p in opp_policies]
        self._sign = 1.0 if player == BLUE else -1.0
        self._t = 0
        self._state = 0
        self._opp = 0

    def clone(self) -> "MixtureRolloutEnv":
        return MixtureRolloutEnv(self.game, self.player, self.opp_policies,
                                 self.opp_mixture, self.observe)

    def _obs(self, rng: np.random.Generator) -> int:
        if self.observe is None:
            return self._state
        return self.observe(self._state, rng)

    def reset(self, rng: np.random.Generator) -> int:
        self._t = 0
        self._state = int(np.searchsorted(self._cum_init, rng.random(), side="right"))
        self._opp = int(np.searchsorted(self._cum_mix, rng.random(), side="right"))
        return self._obs(rng)

    def step(self, action: int, rng: np.random.Generator) -> tuple[int, float, bool]:
        game = self.game
        opp_cum = self._opp_cum_tables[self._opp]
        opp_action = int(np.searchsorted(opp_cum[self._state], rng.random(), side="right"))
        if self.player == BLUE:
            a_b, a_r = action, opp_action
        else:
            a_b, a_r = opp_action, action
        t = (self._state * game.blue_action_count + a_b) * game.red_action_count + a_r
        lo, hi = game.succ_offsets[t], game.succ_offsets[t + 1]
        if hi - lo == 1:
            k = lo
        else:
            cum = np.cumsum(game.succ_prob[lo:hi])
            k = lo + int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        self._state = int(game.succ_state[k])
        self._t += 1
        reward = self._sign * float(game.succ_reward[k])
        return self._obs(rng), reward, self._t >= self.max_episode_steps


@dataclass
class OracleConfig:
    """Parameters of one response oracle.

    ``kind`` is ``exact-vi`` or ``tabular-q``.  The Q-learning constants
    (learning-rate power, exploration anneal, checkpointing) follow the
    defaults below and are all overridable.
    """

    kind: str = "exact-vi"
    name: str = ""
    vi_tolerance: float = 1e-10
    step_budget: int = 20_000
    learning_rate_power: float = 0.6
    explore_start: float = 1.0
    explore_end: float = 0.05
    checkpoints: int = 20
    checkpoint_eval_episodes: int = 20
    discount: float | None = None
    shaping: ShapingConfig = field(default_factory=ShapingConfig)
    ptm: PtmSampler | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("exact-vi", "tabular-q"):
            raise InvalidArgumentError(f"unknown oracle kind {self.kind!r}")
        if self.vi_tolerance <= 0.0:
            raise InvalidArgumentError("vi_tolerance must be positive")
        if self.kind == "tabular-q" and self.step_budget < 1:
            raise InvalidArgumentError("step_budget must be >= 1 for tabular-q")
        if not self.name:
            self.name = self.kind

    def label(self) -> str:
        return self.name


def _greedy_actions(q: np.ndarray, init_table: np.ndarray | None,
                    tol: float = 1e-12) -> np.ndarray:
    """Greedy action per state; ties go to the warm-start policy's
    preferred action, then to the lowest index."""
    tied = q >= q.max(axis=1, keepdims=True) - tol
    if init_table is None:
        return np.argmax(tied, axis=1)
    pref = np.where(tied, init_table, -1.0)
    return np.argmax(pref, axis=1)


def _greedy_return(env, actions: np.ndarray, episodes: int, seed: int,
                   checkpoint: int) -> float:
    gamma = env.evaluation_discount
    total = 0.0
    for e in range(episodes):
        rng = rng_for(seed, "q-eval", checkpoint, e)
        s = env.reset(rng)
        weight = 1.0
        done = False
        while not done:
            s, r, done = env.step(int(actions[s]), rng)
            total += weight * r
            weight *= gamma
    return total / episodes


def q_learning_response(env, cfg: OracleConfig, init: TabularPolicy | None = None,
                        potential: Callable[[int], float] | None = None,
                        ) -> tuple[TabularPolicy, ValueFunctionTable, list[tuple[int, float]]]:
    """Tabular Q-learning for ``cfg.step_budget`` environment steps.

    Rewards pass through the shaping function when configured; checkpoint
    evaluations always use the unshaped environment reward.  Returns the
    best checkpoint's greedy policy, its state-value table and the
    (step, greedy gain) learning curve.  Deterministic given ``cfg.seed``.
    """
    if cfg.step_budget < 1:
        raise InvalidArgumentError("step_budget must be >= 1")
    if init is not None and (init.state_count != env.state_count
                             or init.action_count != env.action_count):
        raise DimensionMismatchError(
            f"init policy shape {init.table.shape} does not match environment "
            f"({env.state_count}, {env.action_count})"
        )
    rng = rng_for(cfg.seed, "q-train")
    n_states, n_actions = env.state_count, env.action_count
    q = np.zeros((n_states, n_actions))
    visits = np.zeros((n_states, n_actions))
    gamma = cfg.discount if cfg.discount is not None else env.discount
    init_table = init.table if init is not None else None
    shaping_on = potential is not None and cfg.shaping.active
    checkpoint_every = max(1, cfg.step_budget // cfg.checkpoints)
    eval_env = env.clone()

    curve: list[tuple[int, float]] = []
    best_gain = -np.inf
    best_q: np.ndarray | None = None
    anneal_span = max(1, cfg.step_budget - 1)

    s = env.reset(rng)
    for step in range(1, cfg.step_budget + 1):
        frac = (step - 1) / anneal_span
        eps = cfg.explore_start + frac * (cfg.explore_end - cfg.explore_start)
        if rng.random() < eps:
            a = int(rng.integers(n_actions))
        else:
            a = int(_greedy_actions(q[s:s + 1], None if init_table is None
                                    else init_table[s:s + 1])[0])
        s_next, r, done = env.step(a, rng)
        r_learn = shaped_reward(r, s, s_next, potential, cfg.shaping) if shaping_on else r
        visits[s, a] += 1.0
        alpha = 1.0 / (1.0 + visits[s, a]) ** cfg.learning_rate_power
        target = r_learn if done else r_learn + gamma * float(q[s_next].max())
        q[s, a] += alpha * (target - q[s, a])
        s = env.reset(rng) if done else s_next

        if step % checkpoint_every == 0 or step == cfg.step_budget:
            actions = _greedy_actions(q, init_table)
            gain = _greedy_return(eval_env, actions, cfg.checkpoint_eval_episodes,
                                  cfg.seed, len(curve))
            curve.append((step, gain))
            if gain > best_gain:
                best_gain = gain
                best_q = q.copy()

    assert best_q is not None
    actions = _greedy_actions(best_q, init_table)
    player = getattr(env, "player", BLUE)
    meta = PolicyMetadata(oracle=cfg.label(), ptm_initialized=init is not None,
                          shaped=shaping_on)
    policy = TabularPolicy.deterministic(actions, n_actions, player, meta)
    vf = ValueFunctionTable(best_q.max(axis=1), origin=(cfg.label(), 0))
    return policy, vf, curve
