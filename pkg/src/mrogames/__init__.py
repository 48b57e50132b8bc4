"""Adversarial training for two-player zero-sum Markov games.

Iterated best-response training over a growing empirical game: response
oracles (exact value iteration or tabular Q-learning with value-function
potential shaping and warm-start sampling) play against solved mixtures
until neither side can improve by more than a threshold.  Ships a
desk-scale lateral-movement cyber-defence environment plus one-step
matrix-game embeddings for exact testing.
"""

from .errors import (
    ConfigError,
    DimensionMismatchError,
    DuplicatePolicyError,
    InvalidArgumentError,
    InvalidStateError,
    MrogamesError,
    ParseError,
    SolverError,
    StateSpaceCapError,
    UnsupportedConfigurationError,
)
from .evaluate import ExactEvaluator, MonteCarloEvaluator
from .game import (
    BLUE,
    RED,
    EvaluationResult,
    MarkovGame,
    Mdp,
    Mixture,
    PolicyMetadata,
    TabularPolicy,
    evaluate_exact,
    evaluate_monte_carlo,
    fold_mixture,
    induce_decision_problem,
)
from .loop import (
    EPSILON_RBNE,
    MAX_ITERATIONS,
    IterationRecord,
    LoopConfig,
    RunTrace,
    exploitability,
    recheck_equilibrium,
    run_ado,
    run_mro,
    select_best,
)
from .matrix import (
    EmpiricalGame,
    SolveResult,
    augment,
    eliminate_iteratively,
    find_dominated,
    predicted_new_cells,
    solve_zero_sum,
    support_gains,
)
from .oracles import (
    MdpRolloutEnv,
    MixtureRolloutEnv,
    OracleConfig,
    PtmChoice,
    PtmSampler,
    ShapingConfig,
    ValueFunctionTable,
    ensemble_potential,
    ensemble_potential_table,
    exact_best_response,
    optimal_values,
    q_learning_response,
    sample_ptm,
    shaped_reward,
    zscore_normalize,
)
from .cyber import (
    CyberActionSpec,
    CyberGameParams,
    CyberState,
    NetworkTopology,
    build_game,
    compromise_false_negative,
    decode_state,
    default_topology,
    encode_state,
    initial_state,
    one_step_matrix_game,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
