"""Dense simplex solver for zero-sum matrix games.

Uses the classic shift-and-normalize formulation: after shifting the
payoff matrix A to strictly positive entries A', the column player's
program is

    maximize sum(w)  subject to  A' w <= 1,  w >= 0,

whose optimum z* satisfies v' = 1 / z*; the column mixture is w / z* and
the row mixture is read off the optimal duals (the objective-row
coefficients under the slack columns).  Pivots follow Bland's rule, which
guarantees termination under degeneracy.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, SolverError

_PIVOT_TOL = 1e-11


def _simplex_max(a: np.ndarray, b: np.ndarray, c: np.ndarray,
                 max_pivots: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Maximize c.x s.t. a x <= b (b >= 0), x >= 0.

    Returns (x, duals, objective).  Raises SolverError on a pivot budget
    overrun or an unbounded direction.
    """
    m, n = a.shape
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :n] = -c  # reduced costs; optimal when all >= -tol
    basis = np.arange(n, n + m)

    for _ in range(max_pivots):
        reduced = tableau[m, :n + m]
        candidates = np.nonzero(reduced < -_PIVOT_TOL)[0]
        if candidates.size == 0:
            break
        col = int(candidates[0])  # Bland: lowest-index entering variable

        rates = tableau[:m, col]
        rows = np.nonzero(rates > _PIVOT_TOL)[0]
        if rows.size == 0:
            raise SolverError("LP is unbounded", {"column": float(col)})
        ratios = tableau[rows, -1] / rates[rows]
        best = ratios.min()
        tied = rows[ratios <= best + _PIVOT_TOL]
        row = int(tied[np.argmin(basis[tied])])  # Bland: lowest basis index

        pivot = tableau[row, col]
        tableau[row] /= pivot
        for r in range(m + 1):
            if r != row and tableau[r, col] != 0.0:
                tableau[r] -= tableau[r, col] * tableau[row]
        basis[row] = col
    else:
        raise SolverError("simplex pivot budget exhausted",
                          {"pivots": float(max_pivots)})

    x = np.zeros(n + m)
    x[basis] = tableau[:m, -1]
    duals = tableau[m, n:n + m].copy()
    return x[:n], duals, float(tableau[m, -1])


def minimax(payoff: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, float]:
    """Optimal mixed strategies and value of the zero-sum game ``payoff``.

    Returns (row_mixture, col_mixture, value) where the row player
    maximizes and the column player minimizes the payoff.
    """
    a = np.asarray(payoff, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise InvalidArgumentError(f"payoff must be a nonempty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("payoff entries must be finite")

    # shift to strictly positive entries and normalize the magnitude so
    # the tableau stays well conditioned regardless of payoff scale
    shift = 1.0 - float(a.min()) if a.min() < 1.0 else 0.0
    a_pos = a + shift
    scale = float(a_pos.max())
    a_pos = a_pos / scale
    m, n = a_pos.shape

    w, duals, z = _simplex_max(a_pos, np.ones(m), np.ones(n),
                               max_pivots=10_000 * (m + n))
    if z <= 0.0:
        raise SolverError("degenerate optimum", {"objective": z})

    y = np.clip(w, 0.0, None)
    y /= y.sum()
    x = np.clip(duals, 0.0, None)
    x /= x.sum()
    value = scale / z - shift

    residuals = {
        "row_certificate": float(value - (x @ a).min()),
        "col_certificate": float((a @ y).max() - value),
    }
    if residuals["row_certificate"] > tol or residuals["col_certificate"] > tol:
        raise SolverError("minimax certificates violated", residuals)
    return x, y, value
