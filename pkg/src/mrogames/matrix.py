"""The empirical normal-form game over learned policies.

Rows are Blue policies, columns are Red policies, entries are Blue's gain.
Provides the minimax solve, augmentation with exact cell accounting,
pure-strategy dominance detection and iterated elimination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import DimensionMismatchError, DuplicatePolicyError, InvalidArgumentError
from .evaluate import Evaluator
from .game import BLUE, RED, MarkovGame, Mixture, TabularPolicy

SOLVER_TOL = 1e-9


@dataclass(frozen=True)
class SolveResult:
    """Minimax mixtures and game value (Blue's perspective)."""

    blue_mixture: Mixture
    red_mixture: Mixture
    value: float
    solver_tolerance: float = SOLVER_TOL


def solve_zero_sum(payoff: np.ndarray, tol: float = SOLVER_TOL) -> SolveResult:
    """Solve the zero-sum matrix game by the built-in simplex routine.

    The returned mixtures satisfy min_col(x'A) >= v - tol and
    max_row(A y) <= v + tol.
    """
    x, y, value = lp.minimax(payoff, tol=tol)
    return SolveResult(Mixture(x, BLUE), Mixture(y, RED), value, tol)


def support_gains(payoff: np.ndarray, blue_mixture: Mixture,
                  red_mixture: Mixture) -> tuple[np.ndarray, np.ndarray]:
    """Per-pure-strategy gains against the opposing mixture.

    Returns (blue_gains, red_gains): Blue row i against the Red mixture,
    and Red column j (Red-signed) against the Blue mixture.  At an
    equilibrium every supported strategy's gain equals the game value.
    """
    a = np.asarray(payoff, dtype=np.float64)
    if a.shape != (len(blue_mixture), len(red_mixture)):
        raise DimensionMismatchError(
            f"payoff shape {a.shape} does not match mixtures "
            f"({len(blue_mixture)}, {len(red_mixture)})"
        )
    blue_gains = a @ red_mixture.weights
    red_gains = -(blue_mixture.weights @ a)
    return blue_gains, red_gains


def predicted_new_cells(n: int, m: int, blue_size: int, red_size: int) -> int:
    """Cells a payoff matrix gains when n rows and m columns are added.

    Sizes are taken before augmentation; the count is the exact enumeration
    (blue_size + n) * (red_size + m) - blue_size * red_size.
    """
    return (blue_size + n) * (red_size + m) - blue_size * red_size


def find_dominated(payoff: np.ndarray, player: str, mode: str = "strict") -> list[int]:
    """Indices of pure strategies dominated by some other pure strategy.

    Dominance is pure-vs-pure only.  ``strict``: strictly worse against
    every opponent strategy; ``weak``: never better and strictly worse at
    least once.
    """
    if mode not in ("strict", "weak"):
        raise InvalidArgumentError(f"mode must be 'strict' or 'weak', got {mode!r}")
    a = np.asarray(payoff, dtype=np.float64)
    if a.size == 0:
        raise InvalidArgumentError("payoff matrix is empty")
    rows = a if player == BLUE else -a.T
    n = rows.shape[0]
    dominated = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            diff = rows[j] - rows[i]
            if mode == "strict":
                if np.all(diff > 0.0):
                    dominated.append(i)
                    break
            else:
                if np.all(diff >= 0.0) and np.any(diff > 0.0):
                    dominated.append(i)
                    break
    return dominated


def eliminate_iteratively(payoff: np.ndarray, mode: str = "strict",
                          ) -> tuple[np.ndarray, list[int], list[int]]:
    """Iterated elimination of dominated strategies, one at a time.

    Removes the lowest-index dominated Blue row if any, else the
    lowest-index dominated Red column, until neither player has a dominated
    strategy.  Returns the reduced matrix plus the per-player removal
    orders in original indices.  Strict mode preserves the game value;
    weak mode is order-dependent, which is why the order is recorded.
    """
    a = np.asarray(payoff, dtype=np.float64).copy()
    blue_ids = list(range(a.shape[0]))
    red_ids = list(range(a.shape[1]))
    blue_order: list[int] = []
    red_order: list[int] = []
    while True:
        rows = find_dominated(a, BLUE, mode)
        if rows and a.shape[0] > 1:
            k = rows[0]
            blue_order.append(blue_ids.pop(k))
            a = np.delete(a, k, axis=0)
            continue
        cols = find_dominated(a, RED, mode)
        if cols and a.shape[1] > 1:
            k = cols[0]
            red_order.append(red_ids.pop(k))
            a = np.delete(a, k, axis=1)
            continue
        break
    return a, blue_order, red_order


@dataclass
class EmpiricalGame:
    """Growing payoff matrix over registered policies.

    ``evaluation_log`` records the measured evaluator pair-calls per
    augmentation (index 0 is the initial build), so augmentation cost is
    auditable against :func:`predicted_new_cells`.
    """

    game: MarkovGame
    evaluator: Evaluator
    payoff: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    blue_registry: list[TabularPolicy] = field(default_factory=list)
    red_registry: list[TabularPolicy] = field(default_factory=list)
    evaluation_log: list[int] = field(default_factory=list)

    @staticmethod
    def from_initial(game: MarkovGame, evaluator: Evaluator,
                     blue: TabularPolicy, red: TabularPolicy) -> "EmpiricalGame":
        eg = EmpiricalGame(game, evaluator)
        eg._append(new_blue=[blue], new_red=[red])
        return eg

    @property
    def shape(self) -> tuple[int, int]:
        return self.payoff.shape

    def total_evaluations(self) -> int:
        return sum(self.evaluation_log)

    def find_duplicate(self, policy: TabularPolicy) -> int | None:
        registry = self.blue_registry if policy.player == BLUE else self.red_registry
        for i, existing in enumerate(registry):
            if existing.same_table(policy):
                return i
        return None

    def _append(self, new_blue: list[TabularPolicy], new_red: list[TabularPolicy]) -> int:
        before = getattr(self.evaluator, "pair_calls", 0)
        b_old, r_old = self.payoff.shape
        blues = self.blue_registry + new_blue
        reds = self.red_registry + new_red
        grown = np.zeros((len(blues), len(reds)))
        grown[:b_old, :r_old] = self.payoff
        for i in range(len(blues)):
            for j in range(len(reds)):
                if i < b_old and j < r_old:
                    continue
                cell = self.evaluator.pair(self.game, blues[i], reds[j],
                                           blue_id=i, red_id=j)
                grown[i, j] = cell.mean_gain_blue
        self.payoff = grown
        self.blue_registry = blues
        self.red_registry = reds
        measured = getattr(self.evaluator, "pair_calls", 0) - before
        self.evaluation_log.append(measured)
        return measured

    def solve(self) -> SolveResult:
        return solve_zero_sum(self.payoff)


def augment(eg: EmpiricalGame, new_blue: list[TabularPolicy],
            new_red: list[TabularPolicy]) -> int:
    """Evaluate exactly the missing cells for the new policies.

    Returns the number of new cells, which always equals
    ``predicted_new_cells(len(new_blue), len(new_red), *old_shape)``.
    Raises :class:`DuplicatePolicyError` if a policy is already registered
    (or repeated within the batch).
    """
    if not new_blue and not new_red:
        raise InvalidArgumentError("augment needs at least one new policy")
    for player, batch in ((BLUE, new_blue), (RED, new_red)):
        seen = list(eg.blue_registry if player == BLUE else eg.red_registry)
        for pol in batch:
            if pol.player != player:
                raise InvalidArgumentError(
                    f"policy for player {pol.player} passed in the {player} batch"
                )
            eg.game.check_policy(pol)
            for idx, existing in enumerate(seen):
                if existing.same_table(pol):
                    raise DuplicatePolicyError(player, idx)
            seen.append(pol)
    b_old, r_old = eg.payoff.shape
    measured = eg._append(new_blue, new_red)
    expected = predicted_new_cells(len(new_blue), len(new_red), b_old, r_old)
    if measured != expected:
        raise InvalidArgumentError(
            f"augmentation accounting broke: measured {measured}, expected {expected}"
        )
    return measured
