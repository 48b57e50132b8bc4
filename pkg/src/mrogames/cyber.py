"""Desk-scale lateral-movement cyber-defence games.

Hosts carry three per-host fields: a compromise level (clean, user, root),
a decoy flag set by Blue, and a known-to-Red flag.  A compromised host is
always known, so each host has 8 valid field combinations and the
enumerated state index is the mixed-radix (base 8) encoding of the
per-host combinations.

Step resolution is Blue first, then Red, both chosen simultaneously:
Blue's remove/restore/decoy take effect before Red's action is resolved
against the updated state.  Red can scan a host that has an edge from a
compromised host, exploit a known clean host reachable the same way (the
entry host is always exploitable), escalate user to root, and impact a
root-held high-value host for the per-step penalty.  An active decoy
absorbs an otherwise-successful exploit, clears itself and pays Blue the
detection bonus.  Blue's restore always costs its fixed fee when played;
remove clears user-level compromise only; analyse is an inert hook kept
for action-space parity.  The known flag is sticky: cleaning a host does
not make Red forget it.

All reward magnitudes are desk-scale constants in :class:`CyberGameParams`;
nothing downstream depends on their specific values, only on their signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, StateSpaceCapError
from .game import MarkovGame

_LEVEL_OF_COMBO = np.array([0, 0, 1, 2])  # clean/unknown, clean, user, root
_COMBOS_PER_HOST = 8  # 4 (level, known) combos x decoy flag

LEVEL_NAMES = ("clean", "user", "root")
BLUE_VERBS = ("analyse", "remove", "restore", "decoy")
RED_VERBS = ("scan", "exploit", "escalate", "impact")


@dataclass(frozen=True)
class NetworkTopology:
    host_count: int
    subnet_of: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    high_value: frozenset[int]
    exploit_success_prob: tuple[float, ...]
    red_entry_host: int

    def __post_init__(self):
        if self.host_count < 1:
            raise InvalidArgumentError("host_count must be positive")
        if not 0 <= self.red_entry_host < self.host_count:
            raise InvalidArgumentError(
                f"red_entry_host {self.red_entry_host} out of range"
            )
        if len(self.subnet_of) != self.host_count:
            raise InvalidArgumentError("subnet_of must list every host")
        if len(self.exploit_success_prob) != self.host_count:
            raise InvalidArgumentError("exploit_success_prob must list every host")
        for h, p in enumerate(self.exploit_success_prob):
            if not 0.0 < p <= 1.0:
                raise InvalidArgumentError(
                    f"exploit_success_prob[{h}] = {p} must be in (0, 1]"
                )
        for src, dst in self.edges:
            if not (0 <= src < self.host_count and 0 <= dst < self.host_count):
                raise InvalidArgumentError(f"edge ({src}, {dst}) references unknown host")
        if not self.high_value:
            raise InvalidArgumentError("at least one high-value host is required")
        for h in self.high_value:
            if not 0 <= h < self.host_count:
                raise InvalidArgumentError(f"high-value host {h} out of range")

    def state_count(self) -> int:
        return _COMBOS_PER_HOST ** self.host_count

    def action_count(self) -> int:
        return 1 + 4 * self.host_count


@dataclass(frozen=True)
class CyberState:
    """Decoded per-host fields; bijective with the enumerated state index
    (over the valid combinations where compromise implies known)."""

    compromise: tuple[str, ...]
    decoy: tuple[bool, ...]
    known: tuple[bool, ...]


@dataclass(frozen=True)
class CyberGameParams:
    horizon: int | None = 25
    discount: float = 0.95  # used inside learning oracles only
    impact_penalty: float = -10.0
    restore_cost: float = -1.0
    decoy_bonus: float = 1.0
    state_cap: int = 50_000


class CyberActionSpec:
    """Index <-> name mapping; action counts are 1 + 4 * host_count."""

    def __init__(self, host_count: int):
        self.host_count = host_count
        self.action_count = 1 + 4 * host_count

    def _name(self, index: int, verbs: tuple[str, ...]) -> str:
        if index == 0:
            return "sleep"
        host, verb = divmod(index - 1, 4)
        return f"{verbs[verb]}({host})"

    def blue_name(self, index: int) -> str:
        return self._name(index, BLUE_VERBS)

    def red_name(self, index: int) -> str:
        return self._name(index, RED_VERBS)

    def blue_index(self, verb: str, host: int) -> int:
        return 1 + 4 * host + BLUE_VERBS.index(verb)

    def red_index(self, verb: str, host: int) -> int:
        return 1 + 4 * host + RED_VERBS.index(verb)


def decode_state(topology: NetworkTopology, state: int) -> CyberState:
    comp, dec, known = [], [], []
    for h in range(topology.host_count):
        local = (state >> (3 * h)) & 7
        combo, d = local >> 1, local & 1
        comp.append(LEVEL_NAMES[int(_LEVEL_OF_COMBO[combo])])
        known.append(combo >= 1)
        dec.append(bool(d))
    return CyberState(tuple(comp), tuple(dec), tuple(known))


def encode_state(topology: NetworkTopology, cyber_state: CyberState) -> int:
    state = 0
    for h in range(topology.host_count):
        level = LEVEL_NAMES.index(cyber_state.compromise[h])
        known = cyber_state.known[h]
        if level > 0 and not known:
            raise InvalidArgumentError(f"host {h} is compromised but unknown")
        combo = 0 if not known else 1 + level
        state += ((combo << 1) | int(cyber_state.decoy[h])) << (3 * h)
    return state


def initial_state(topology: NetworkTopology) -> int:
    # entry host starts at user level (combo 2), everything else untouched
    return (2 << 1) << (3 * topology.red_entry_host)


def build_game(topology: NetworkTopology, params: CyberGameParams | None = None,
               ) -> MarkovGame:
    """Fully enumerate the zero-sum Markov game induced by the topology."""
    params = params or CyberGameParams()
    n_hosts = topology.host_count
    n_states = topology.state_count()
    if n_states > params.state_cap:
        raise StateSpaceCapError(n_states, params.state_cap)
    n_actions = topology.action_count()
    entry = topology.red_entry_host
    in_edges: list[list[int]] = [[] for _ in range(n_hosts)]
    for src, dst in topology.edges:
        in_edges[dst].append(src)

    idx = np.arange(n_states, dtype=np.int64)
    combo0 = np.stack([(idx >> (3 * h)) & 7 for h in range(n_hosts)]) >> 1
    decoy0 = (np.stack([(idx >> (3 * h)) & 7 for h in range(n_hosts)]) & 1).astype(bool)

    # every triple has one primary successor entry; exploit actions add a
    # miss branch, so the flat arrays are assembled by direct scatter
    keys: list[np.ndarray] = []
    succ: list[np.ndarray] = []
    prob: list[np.ndarray] = []
    rew: list[np.ndarray] = []
    miss_keys: list[np.ndarray] = []
    miss_succ: list[np.ndarray] = []
    miss_prob: list[np.ndarray] = []
    miss_rew: list[np.ndarray] = []

    key_base = idx * (n_actions * n_actions)
    shared_ones = np.ones(n_states)
    shared_zeros = np.zeros(n_states)

    for a_b in range(n_actions):
        # Blue resolves first
        combo = combo0
        decoy = decoy0
        blue_reward = shared_zeros
        if a_b > 0:
            hb, verb = divmod(a_b - 1, 4)
            if verb == 1:  # remove: clears user-level compromise
                combo = combo0.copy()
                combo[hb] = np.where(combo0[hb] == 2, 1, combo0[hb])
            elif verb == 2:  # restore: clears any compromise, fixed cost on use
                combo = combo0.copy()
                combo[hb] = np.where(combo0[hb] >= 2, 1, combo0[hb])
                blue_reward = np.full(n_states, params.restore_cost)
            elif verb == 3:  # decoy
                decoy = decoy0.copy()
                decoy[hb] = True
        if a_b > 0 and combo is not combo0:
            hb = (a_b - 1) // 4
            s_blue = idx + ((combo[hb] - combo0[hb]) << (3 * hb + 1))
        elif a_b > 0 and decoy is not decoy0:
            hb = (a_b - 1) // 4
            s_blue = idx + ((decoy[hb].astype(np.int64) - decoy0[hb]) << (3 * hb))
        else:
            s_blue = idx
        levels = _LEVEL_OF_COMBO[combo]
        owned = levels >= 1
        neighbor_owned = [
            np.any(owned[in_edges[h]], axis=0) if in_edges[h]
            else np.zeros(n_states, dtype=bool)
            for h in range(n_hosts)
        ]

        for a_r in range(n_actions):
            key = key_base + (a_b * n_actions + a_r)
            if a_r == 0:
                keys.append(key)
                succ.append(s_blue)
                prob.append(shared_ones)
                rew.append(blue_reward)
                continue
            hr, verb = divmod(a_r - 1, 4)
            if verb == 0:  # scan: reveal a neighbor of a compromised host
                ok = (combo[hr] == 0) & neighbor_owned[hr]
                s_fin = s_blue + (ok.astype(np.int64) << (3 * hr + 1))
                keys.append(key)
                succ.append(s_fin)
                prob.append(shared_ones)
                rew.append(blue_reward)
            elif verb == 1:  # exploit
                feasible = (combo[hr] == 1) & ((hr == entry) | neighbor_owned[hr])
                absorbed = feasible & decoy[hr]
                attempt = feasible & ~decoy[hr]
                p_hit = topology.exploit_success_prob[hr]
                delta = attempt.astype(np.int64) * 2 - absorbed.astype(np.int64)
                first = s_blue + (delta << (3 * hr))
                keys.append(key)
                succ.append(first)
                prob.append(np.where(attempt, p_hit, 1.0))
                rew.append(blue_reward + np.where(absorbed, params.decoy_bonus, 0.0))
                if p_hit < 1.0:
                    miss = np.nonzero(attempt)[0]
                    miss_keys.append(key[miss])
                    miss_succ.append(s_blue[miss])
                    miss_prob.append(np.full(miss.shape[0], 1.0 - p_hit))
                    miss_rew.append(blue_reward[miss])
            elif verb == 2:  # escalate user -> root
                ok = combo[hr] == 2
                s_fin = s_blue + (ok.astype(np.int64) << (3 * hr + 1))
                keys.append(key)
                succ.append(s_fin)
                prob.append(shared_ones)
                rew.append(blue_reward)
            else:  # impact a root-held high-value host
                scored = (combo[hr] == 3) & (hr in topology.high_value)
                keys.append(key)
                succ.append(s_blue)
                prob.append(shared_ones)
                rew.append(blue_reward + np.where(scored, params.impact_penalty, 0.0))

    n_triples = n_states * n_actions * n_actions
    first_keys = np.concatenate(keys)
    extra_keys = np.concatenate(miss_keys) if miss_keys else np.empty(0, dtype=np.int64)
    counts = np.ones(n_triples, dtype=np.int64)
    counts += np.bincount(extra_keys, minlength=n_triples)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    total = int(offsets[-1])
    all_succ = np.empty(total, dtype=np.int64)
    all_prob = np.empty(total)
    all_rew = np.empty(total)
    first_slots = offsets[first_keys]
    all_succ[first_slots] = np.concatenate(succ)
    all_prob[first_slots] = np.concatenate(prob)
    all_rew[first_slots] = np.concatenate(rew)
    if extra_keys.size:
        extra_slots = offsets[extra_keys] + 1
        all_succ[extra_slots] = np.concatenate(miss_succ)
        all_prob[extra_slots] = np.concatenate(miss_prob)
        all_rew[extra_slots] = np.concatenate(miss_rew)

    init = np.zeros(n_states)
    init[initial_state(topology)] = 1.0
    return MarkovGame(n_states, n_actions, n_actions, offsets, all_succ, all_prob,
                      all_rew, params.discount, params.horizon, init)


def default_topology(preset: str) -> NetworkTopology:
    """Shipped presets: ``tiny`` (3-host chain across three subnets, last
    host high-value) and ``small`` (5 hosts, 3 subnets, 2 high-value)."""
    if preset == "tiny":
        return NetworkTopology(
            host_count=3,
            subnet_of=(0, 1, 2),
            edges=frozenset({(0, 1), (1, 2)}),
            high_value=frozenset({2}),
            exploit_success_prob=(0.9, 0.8, 0.7),
            red_entry_host=0,
        )
    if preset == "small":
        return NetworkTopology(
            host_count=5,
            subnet_of=(0, 0, 1, 1, 2),
            edges=frozenset({(0, 1), (1, 0), (0, 2), (1, 2), (2, 3), (3, 2),
                             (2, 4), (3, 4)}),
            high_value=frozenset({3, 4}),
            exploit_success_prob=(0.9, 0.9, 0.8, 0.7, 0.6),
            red_entry_host=0,
        )
    raise InvalidArgumentError(f"unknown topology preset {preset!r}")


def one_step_matrix_game(payoff: np.ndarray) -> MarkovGame:
    """Embed a normal-form game: one state, one step, Blue reward = payoff."""
    a = np.asarray(payoff, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise InvalidArgumentError(f"payoff must be a nonempty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("payoff entries must be finite")
    n_b, n_r = a.shape
    transition = np.ones((1, n_b, n_r, 1))
    reward = a.reshape(1, n_b, n_r, 1)
    return MarkovGame.from_dense(transition, reward, discount=1.0, horizon=1,
                                 initial_distribution=np.array([1.0]))


def compromise_false_negative(topology: NetworkTopology, probability: float):
    """Observation-noise hook for the Q-learning path: each compromised
    host independently reads as clean with the given probability."""
    if not 0.0 <= probability <= 1.0:
        raise InvalidArgumentError("probability must be in [0, 1]")
    n_hosts = topology.host_count

    def observe(state: int, rng: np.random.Generator) -> int:
        if probability == 0.0:
            return state
        observed = state
        for h in range(n_hosts):
            local = (state >> (3 * h)) & 7
            combo = local >> 1
            if combo >= 2 and rng.random() < probability:
                observed -= (combo - 1) << (3 * h + 1)
        return observed

    return observe
