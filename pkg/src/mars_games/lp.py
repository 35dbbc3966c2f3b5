"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0``.  Pivoting
is fully deterministic: the entering column is the lowest-index improving
column and ratio-test ties go to the lowest-index basic variable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import Infeasible, IterationLimit, Unbounded

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
REL_PIVOT_TOL = 1e-9
ZERO_TOL = 1e-14


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    value: float
    iterations: int
    max_residual: float


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])
    # flush round-off so degenerate pivots cannot select noise as a pivot element
    T[np.abs(T) < ZERO_TOL] = 0.0


def _run_simplex(T: np.ndarray, basis: list, allowed: int, max_iter: int) -> int:
    """Optimize the tableau in place; the last row holds reduced costs and -objective.

    Only the first ``allowed`` columns may enter the basis.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        reduced = T[-1, :allowed]
        improving = np.flatnonzero(reduced > PIVOT_TOL)
        if improving.size == 0:
            return it
        col = int(improving[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > max(PIVOT_TOL, REL_PIVOT_TOL * column.max(initial=0.0)))
        if rows.size == 0:
            raise Unbounded(f"objective unbounded along column {col}")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise IterationLimit(f"simplex exceeded {max_iter} pivots")


def lp_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 10_000) -> LPResult:
    """Maximize ``c @ x`` over the polyhedron; raises Infeasible/Unbounded/IterationLimit."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x (n) | slacks (m_ub) | artificials (m) | rhs
    n_struct = n + m_ub
    A = np.zeros((m, n_struct))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    T = np.zeros((m + 1, n_struct + m + 1))
    T[:m, :n_struct] = A
    T[:m, -1] = b
    basis = []
    artificial_rows = []
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis.append(n + i)
        else:
            T[i, n_struct + i] = 1.0
            basis.append(n_struct + i)
            artificial_rows.append(i)

    iterations = 0
    if artificial_rows:
        # phase 1: maximize -(sum of artificials)
        for i in artificial_rows:
            T[-1] += T[i]
        for i in artificial_rows:
            T[-1, n_struct + i] = 0.0
        iterations += _run_simplex(T, basis, n_struct, max_iter)
        if T[-1, -1] > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            raise Infeasible(f"phase-1 optimum {T[-1, -1]:.3e} leaves artificials positive")
        # drive remaining artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= n_struct:
                row = np.abs(T[i, :n_struct])
                if row.max(initial=0.0) > 1e-9:
                    col = int(np.argmax(row))
                    _pivot(T, i, col)
                    basis[i] = col
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        m = len(keep)

    T = np.hstack([T[:, :n_struct], T[:, -1:]])
    cost = np.concatenate([c, np.zeros(m_ub)])
    T[-1] = 0.0
    T[-1, :n_struct] = cost
    for i, j in enumerate(basis):
        T[-1] -= cost[j] * T[i]
    iterations += _run_simplex(T, basis, n_struct, max_iter - iterations)

    z = np.zeros(n_struct)
    for i, j in enumerate(basis):
        z[j] = T[i, -1]
    x = np.clip(z[:n], 0.0, None)
    resid = 0.0
    if m_ub:
        resid = max(resid, float(np.max(A_ub @ x - b_ub, initial=0.0)))
    if m_eq:
        resid = max(resid, float(np.max(np.abs(A_eq @ x - b_eq))))
    return LPResult(x=x, value=float(c @ x), iterations=iterations, max_residual=resid)
