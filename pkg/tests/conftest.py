import numpy as np
import pytest

from mrogames import (
    BLUE,
    RED,
    MarkovGame,
    TabularPolicy,
    build_game,
    default_topology,
    one_step_matrix_game,
)

RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
MATCHING_PENNIES = np.array([[1.0, -1.0], [-1.0, 1.0]])
SADDLE = np.array([[3.0, 0.0], [1.0, 2.0]])


@pytest.fixture
def rps_game() -> MarkovGame:
    return one_step_matrix_game(RPS)


@pytest.fixture
def pennies_game() -> MarkovGame:
    return one_step_matrix_game(MATCHING_PENNIES)


@pytest.fixture(scope="session")
def tiny_game() -> MarkovGame:
    return build_game(default_topology("tiny"))


def uniform(game: MarkovGame, player: str) -> TabularPolicy:
    return TabularPolicy.uniform(game.state_count, game.action_count(player), player)


def pure(game: MarkovGame, player: str, action: int) -> TabularPolicy:
    return TabularPolicy.pure(game.state_count, game.action_count(player), action, player)


def game_dense(game: MarkovGame) -> tuple[np.ndarray, np.ndarray]:
    """Dense (S, AB, AR, S) transition and reward arrays from the flat form."""
    shape = (game.state_count, game.blue_action_count, game.red_action_count,
             game.state_count)
    p = np.zeros(shape)
    r = np.zeros(shape)
    a_b, a_r = game.blue_action_count, game.red_action_count
    for t in range(game.state_count * a_b * a_r):
        s, rem = divmod(t, a_b * a_r)
        b, c = divmod(rem, a_r)
        for k in range(game.succ_offsets[t], game.succ_offsets[t + 1]):
            s2 = game.succ_state[k]
            p[s, b, c, s2] += game.succ_prob[k]
            r[s, b, c, s2] = game.succ_reward[k]
    return p, r


def mdp_dense(mdp) -> tuple[np.ndarray, np.ndarray]:
    """Dense (S, A, S) transition and reward arrays from a decision problem."""
    p = np.zeros((mdp.state_count, mdp.action_count, mdp.state_count))
    r = np.zeros_like(p)
    for pair in range(mdp.state_count * mdp.action_count):
        s, a = divmod(pair, mdp.action_count)
        for k in range(mdp.succ_offsets[pair], mdp.succ_offsets[pair + 1]):
            s2 = mdp.succ_state[k]
            p[s, a, s2] += mdp.succ_prob[k]
            r[s, a, s2] = mdp.succ_reward[k]
    return p, r


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int,
               discount: float = 0.9):
    """A random dense decision problem for property tests."""
    from mrogames import Mdp

    raw = rng.random((n_states, n_actions, n_states)) ** 2
    p = raw / raw.sum(axis=2, keepdims=True)
    r = rng.normal(size=(n_states, n_actions, n_states))
    init = np.full(n_states, 1.0 / n_states)
    return Mdp.from_dense(p, r, discount, None, init)
