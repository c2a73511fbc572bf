"""
Dense two-phase tableau simplex for small linear programs.

    minimize    c x
    subject to  A[i] x (<=, >=, =) b[i]
                x >= 0

Bland's rule is used for both the entering and the leaving variable, so the
method terminates on degenerate problems.
"""

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: Optional[np.ndarray] = None
    fun: Optional[float] = None
    iterations: int = 0

    @property
    def success(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, table: np.ndarray, basis: List[int], tol: float):
        self.T = table
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        for i in range(T.shape[0]):
            if i != row and T[i, col] != 0.0:
                T[i] -= T[i, col] * T[row]
        self.basis[row] = col
        self.iterations += 1

    def optimize(self, allowed: int, max_iter: int) -> str:
        """Run pivots on the last row as objective; columns >= allowed never enter"""
        T, tol = self.T, self.tol
        m = T.shape[0] - 1
        while self.iterations < max_iter:
            reduced = T[-1, :allowed]
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return "optimal"
            col = int(candidates[0])
            column = T[:m, col]
            rows = np.flatnonzero(column > tol)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)
        raise RuntimeError(f"simplex did not converge in {max_iter} iterations")


def simplex_minimize(
    c: Sequence[float],
    A: Sequence[Sequence[float]],
    b: Sequence[float],
    senses: Sequence[str],
    tol: float = 1e-9,
    max_iter: int = 50_000,
) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).copy()
    senses = list(senses)
    m, n = A.shape
    if len(senses) != m or b.shape[0] != m:
        raise ValueError("A, b and senses disagree on the number of constraints")
    A = A.copy()

    # make every right-hand side non-negative
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]

    n_slack = sum(1 for s in senses if s in (LE, GE))
    n_art = sum(1 for s in senses if s in (GE, EQ))
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = [0] * m
    slack_col, art_col = n, n + n_slack
    art_rows = []
    for i, sense in enumerate(senses):
        if sense == LE:
            T[i, slack_col] = 1.0
            basis[i] = slack_col
            slack_col += 1
        else:
            if sense == GE:
                T[i, slack_col] = -1.0
                slack_col += 1
            T[i, art_col] = 1.0
            basis[i] = art_col
            art_col += 1
            art_rows.append(i)

    first_art = n + n_slack
    tab = _Tableau(T, basis, tol)

    # phase 1: minimize the sum of artificial variables
    if art_rows:
        T[-1, first_art:width] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        tab.optimize(width, max_iter)
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        if -T[-1, -1] > tol * scale * 10:
            return LPResult("infeasible", iterations=tab.iterations)

        # drive artificial variables out of the basis, dropping redundant rows
        keep = []
        for i in range(m):
            if tab.basis[i] >= first_art:
                cols = np.flatnonzero(np.abs(T[i, :first_art]) > tol)
                if cols.size == 0:
                    continue
                tab.pivot(i, int(cols[0]))
            keep.append(i)
        T = np.vstack([tab.T[keep], tab.T[-1:]])
        done = tab.iterations
        tab = _Tableau(T, [tab.basis[i] for i in keep], tol)
        tab.iterations = done

    # phase 2 on the original objective, artificial columns excluded
    T = np.hstack([tab.T[:, :first_art], tab.T[:, -1:]])
    T[-1] = 0.0
    T[-1, :n] = c
    for i, col in enumerate(tab.basis):
        if T[-1, col] != 0.0:
            T[-1] -= T[-1, col] * T[i]
    phase2 = _Tableau(T, tab.basis, tol)
    status = phase2.optimize(first_art, max_iter)
    iterations = tab.iterations + phase2.iterations
    if status == "unbounded":
        return LPResult("unbounded", iterations=iterations)

    x = np.zeros(first_art)
    for i, col in enumerate(phase2.basis):
        x[col] = T[i, -1]
    x = np.clip(x[:n], 0.0, None)
    return LPResult("optimal", x=x, fun=float(c @ x), iterations=iterations)


def vertex_minimize(
    c: Sequence[float],
    A: Sequence[Sequence[float]],
    b: Sequence[float],
    senses: Sequence[str],
    tol: float = 1e-9,
) -> LPResult:
    """
    Brute force over every basis of the equality form. Exponential; meant as an
    independent cross-check of simplex_minimize on small problems.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    slack_cols = []
    for i, sense in enumerate(senses):
        if sense != EQ:
            col = np.zeros(m)
            col[i] = 1.0 if sense == LE else -1.0
            slack_cols.append(col)
    full = np.hstack([A, np.array(slack_cols).T]) if slack_cols else A
    cost = np.concatenate([c, np.zeros(full.shape[1] - n)])

    best_x, best_fun, checked = None, np.inf, 0
    for cols in itertools.combinations(range(full.shape[1]), m):
        B = full[:, cols]
        checked += 1
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x_b = np.linalg.solve(B, b)
        if (x_b < -tol).any():
            continue
        fun = float(cost[list(cols)] @ x_b)
        if fun < best_fun - tol:
            best_fun = fun
            best_x = np.zeros(full.shape[1])
            best_x[list(cols)] = np.clip(x_b, 0.0, None)
    if best_x is None:
        return LPResult("infeasible", iterations=checked)
    return LPResult("optimal", x=best_x[:n], fun=best_fun, iterations=checked)
