"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria complete.  Tolerances and runtime budgets are asserted exactly as
stated; nothing here is calibrated after the fact.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from mrogames import (
    BLUE,
    RED,
    EPSILON_RBNE,
    ExactEvaluator,
    LoopConfig,
    Mixture,
    MixtureRolloutEnv,
    OracleConfig,
    ShapingConfig,
    TabularPolicy,
    build_game,
    default_topology,
    eliminate_iteratively,
    ensemble_potential_table,
    one_step_matrix_game,
    optimal_values,
    predicted_new_cells,
    q_learning_response,
    recheck_equilibrium,
    run_ado,
    run_mro,
    solve_zero_sum,
    support_gains,
)
from mrogames.cli import main as cli_main

from conftest import RPS, pure, random_mdp

EXACT = OracleConfig(kind="exact-vi")


@contextmanager
def criterion(cid: str, summary: str):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[{cid}] FAIL  {summary}")
        raise
    elapsed = time.perf_counter() - started
    print(f"[{cid}] PASS  {summary}  ({elapsed:.2f}s)")


@pytest.fixture(scope="module")
def tiny_game():
    return build_game(default_topology("tiny"))


@pytest.fixture(scope="module")
def tiny_trace(tiny_game):
    cfg = LoopConfig(epsilon=1e-6, max_iterations=40)
    started = time.perf_counter()
    trace = run_mro(tiny_game, [EXACT], [EXACT], cfg)
    trace.runtime = time.perf_counter() - started
    trace.config = cfg
    return trace


def test_a1_double_oracle_converges_on_rps():
    with criterion("A1", "double-oracle convergence on rock-paper-scissors"):
        game = one_step_matrix_game(RPS)
        cfg = LoopConfig(epsilon=1e-6, max_iterations=10,
                         initial_blue=pure(game, BLUE, 0),
                         initial_red=pure(game, RED, 0))
        started = time.perf_counter()
        trace = run_ado(game, EXACT, EXACT, cfg)
        runtime = time.perf_counter() - started
        assert trace.termination == EPSILON_RBNE
        assert trace.iterations <= 5
        assert np.allclose(trace.solution.blue_mixture.weights, 1 / 3, atol=1e-6)
        assert np.allclose(trace.solution.red_mixture.weights, 1 / 3, atol=1e-6)
        assert abs(trace.solution.value) <= 1e-9
        assert runtime < 1.0


def test_a2_shaping_invariance_suite():
    with criterion("A2", "potential-shaping policy invariance and Q-shift"):
        started = time.perf_counter()
        taus = (0.5, 1.0, 2.0)
        for index in range(200):
            rng = np.random.default_rng(10_000 + index)
            n_states = int(rng.integers(2, 7))
            n_actions = int(rng.integers(2, 5))
            mdp = random_mdp(rng, n_states, n_actions, discount=0.9)
            tau = taus[index % 3]
            phi = rng.uniform(-5.0, 5.0, size=n_states)
            shaped = mdp.with_shaped_rewards(phi, tau, gamma_phi=0.9)
            _, q_plain = optimal_values(mdp, 1e-10)
            _, q_shaped = optimal_values(shaped, 1e-10)
            for s in range(n_states):
                plain = set(np.nonzero(q_plain[s] >= q_plain[s].max() - 1e-8)[0])
                sh = set(np.nonzero(q_shaped[s] >= q_shaped[s].max() - 1e-8)[0])
                assert plain == sh, f"greedy sets differ on instance {index}"
            drift = np.max(np.abs(q_shaped - (q_plain - tau * phi[:, None])))
            assert drift <= 1e-7, f"Q-shift drift {drift} on instance {index}"
        assert time.perf_counter() - started < 30.0


def test_a3_lp_certificates():
    with criterion("A3", "minimax certificates and support indifference"):
        started = time.perf_counter()
        for index in range(500):
            rng = np.random.default_rng(20_000 + index)
            shape = rng.integers(1, 9, size=2)
            payoff = rng.uniform(-10.0, 10.0, size=shape)
            result = solve_zero_sum(payoff)
            x = result.blue_mixture.weights
            y = result.red_mixture.weights
            assert (x @ payoff).min() >= result.value - 1e-9
            assert (payoff @ y).max() <= result.value + 1e-9
            blue_gains, red_gains = support_gains(payoff, result.blue_mixture,
                                                  result.red_mixture)
            for i in result.blue_mixture.support():
                assert abs(blue_gains[i] - result.value) <= 1e-6
            for j in result.red_mixture.support():
                assert abs(red_gains[j] + result.value) <= 1e-6
        assert time.perf_counter() - started < 10.0


def test_a4_strict_elimination_preserves_value():
    with criterion("A4", "strict elimination preserves the game value"):
        for index in range(100):
            rng = np.random.default_rng(30_000 + index)
            payoff = rng.uniform(-5.0, 5.0, size=(6, 6))
            row_victim = int(rng.integers(0, 6))
            row_donor = (row_victim + 1 + int(rng.integers(0, 5))) % 6
            payoff[row_victim] = payoff[row_donor] - rng.uniform(0.2, 1.0)
            col_victim = int(rng.integers(0, 6))
            col_donor = (col_victim + 1 + int(rng.integers(0, 5))) % 6
            payoff[:, col_victim] = payoff[:, col_donor] + rng.uniform(0.2, 1.0)
            reduced, blue_gone, red_gone = eliminate_iteratively(payoff, "strict")
            assert row_victim in blue_gone or col_victim in red_gone
            assert reduced.shape[0] < 6 or reduced.shape[1] < 6
            original_value = solve_zero_sum(payoff).value
            reduced_value = solve_zero_sum(reduced).value
            assert abs(original_value - reduced_value) <= 1e-9


def test_a5_augmentation_accounting(tiny_trace):
    with criterion("A5", "augmentation cost accounting and its closed form"):
        # measured evaluator calls per iteration equal the prediction
        log = tiny_trace.empirical.evaluation_log
        assert log[0] == 1  # initial 1x1 build
        sizes = (1, 1)
        log_index = 1
        for record in tiny_trace.records:
            if record.blue_added or record.red_added:
                predicted = predicted_new_cells(record.blue_added,
                                                record.red_added, *sizes)
                assert record.new_cells == predicted
                assert log[log_index] == predicted
                log_index += 1
                sizes = (sizes[0] + record.blue_added,
                         sizes[1] + record.red_added)
            else:
                assert record.new_cells == 0
        assert log_index == len(log)
        assert tiny_trace.empirical.shape == sizes

        # closed form at four oracles per player, iteration-100 sizes
        assert predicted_new_cells(4, 4, 397, 397) == 3192
        # start-size accounting form undercounts by n*m; with
        # post-augmentation sizes the same form is exact
        n = m = 4
        start_form = n * 397 + m * 397 - n * m
        post_form = n * (397 + m) + m * (397 + n) - n * m
        assert start_form == 3160
        assert predicted_new_cells(4, 4, 397, 397) == start_form + 2 * n * m
        assert predicted_new_cells(4, 4, 397, 397) == post_form


def test_a6_mini_cyber_equilibrium(tiny_game, tiny_trace):
    with criterion("A6", "mini cyber game reaches an equilibrium"):
        assert tiny_trace.termination == EPSILON_RBNE
        assert tiny_trace.final_exploitability <= 1e-6
        for record in tiny_trace.records:
            assert record.exploitability >= -1e-9
        improvement = recheck_equilibrium(tiny_game, tiny_trace, [EXACT], [EXACT],
                                          tiny_trace.config)
        assert improvement <= 1e-6
        assert tiny_trace.runtime < 120.0


def test_a7_shaping_beats_vanilla_qualitatively(tiny_game):
    with criterion("A7", "value-function shaping at least matches vanilla"):
        # fixed mid-run mixtures from a run started at do-nothing policies
        sleep_blue = pure(tiny_game, BLUE, 0)
        sleep_red = pure(tiny_game, RED, 0)
        cfg = LoopConfig(epsilon=1e-6, max_iterations=2,
                         initial_blue=sleep_blue, initial_red=sleep_red)
        trace = run_mro(tiny_game, [EXACT], [EXACT], cfg)
        record = trace.records[1]
        blue_mixture = Mixture(np.array(record.blue_mixture), BLUE)
        blue_registry = trace.empirical.blue_registry[:len(blue_mixture)]

        # the learner's own mixture selects its shaping potential
        own_weights = np.array(record.red_mixture)
        pairs = [(w, vf) for w, vf in zip(own_weights, trace.red_value_tables)
                 if vf is not None and w > 0.0]
        assert pairs, "mid-run mixture carries no value tables"
        weights = np.array([w for w, _ in pairs])
        weights /= weights.sum()
        table = ensemble_potential_table([vf for _, vf in pairs],
                                         Mixture(weights, RED))
        potential = lambda s: float(table[s])  # noqa: E731

        evaluator = ExactEvaluator()
        vanilla_gains, shaped_gains = [], []
        for seed in range(10):
            for label, pot in (("vanilla", None), ("shaped", potential)):
                shaping = ShapingConfig(tau=1.0, gamma_phi=1.0, mode="ensemble") \
                    if pot is not None else ShapingConfig()
                oracle = OracleConfig(kind="tabular-q", step_budget=6000,
                                      seed=seed, shaping=shaping)
                env = MixtureRolloutEnv(tiny_game, RED, blue_registry,
                                        blue_mixture)
                policy, _, _ = q_learning_response(env, oracle, potential=pot)
                gain = evaluator.vs_mixture(tiny_game, policy, blue_registry,
                                            blue_mixture).gain(RED)
                (vanilla_gains if pot is None else shaped_gains).append(gain)

        wins = sum(s >= v for s, v in zip(shaped_gains, vanilla_gains))
        med_shaped = float(np.median(shaped_gains))
        med_vanilla = float(np.median(vanilla_gains))
        print(f"      shaped median {med_shaped:.2f}, vanilla median "
              f"{med_vanilla:.2f}, shaped >= vanilla in {wins}/10 pairs")
        assert wins >= 6
        assert med_shaped >= med_vanilla - 0.05 * abs(med_vanilla)


def test_a8_value_path_monotonicity(tiny_trace):
    with criterion("A8", "one-sided additions move the value monotonically"):
        records = tiny_trace.records
        assert records
        for prev, nxt in zip(records, records[1:]):
            if prev.blue_added == 0 and prev.red_added > 0:
                assert nxt.value <= prev.value + 1e-9
            if prev.red_added == 0 and prev.blue_added > 0:
                assert nxt.value >= prev.value - 1e-9


A9_CONFIG = """
game:
  preset: rps
loop:
  epsilon: 0.05
  max_iterations: 4
  evaluator: monte-carlo
  episodes: 80
initial_policies:
  blue: pure:0
  red: pure:0
blue_oracles:
  - kind: exact-vi
  - kind: tabular-q
    step_budget: 400
    checkpoint_eval_episodes: 4
    shaping:
      mode: ensemble
      tau: 1.0
      gamma_phi: 1.0
    ptm:
      epsilon: 1.0
      decay: 0.95
      generalist: initial
red_oracles:
  - kind: tabular-q
    step_budget: 400
    checkpoint_eval_episodes: 4
seed: 41
"""


def test_a9_full_run_reproducibility(tmp_path):
    with criterion("A9", "identical config and seed reproduce output bytes"):
        config = tmp_path / "run.yaml"
        config.write_text(A9_CONFIG)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        code_a = cli_main(["run", str(config), "--output-dir", str(out_a),
                           "--quiet"])
        code_b = cli_main(["run", str(config), "--output-dir", str(out_b),
                           "--quiet"])
        assert code_a == code_b
        assert code_a in (0, 2)
        csv_a = (out_a / "convergence.csv").read_bytes()
        csv_b = (out_b / "convergence.csv").read_bytes()
        assert csv_a == csv_b
        mix_a = (out_a / "mixtures.mixture").read_bytes()
        mix_b = (out_b / "mixtures.mixture").read_bytes()
        assert mix_a == mix_b
