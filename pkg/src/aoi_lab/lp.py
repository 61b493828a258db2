"""Dense two-phase simplex with Bland's anti-cycling rule.

Sized for problems with a handful of constraints and many columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LpInfeasible(ValueError):
    pass


class LpUnbounded(ValueError):
    pass


@dataclass
class LpResult:
    x: np.ndarray
    value: float
    iterations: int
    basis: np.ndarray


def _pivot(T: np.ndarray, r: int, c: int):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: np.ndarray, basis: np.ndarray, n_cols: int, tol: float, max_iter: int) -> int:
    """Minimise the objective held in the last row of ``T`` over the first ``n_cols`` columns."""
    m = T.shape[0] - 1
    for it in range(max_iter):
        red = T[-1, :n_cols]
        cand = np.flatnonzero(red < -tol)
        if cand.size == 0:
            return it
        c = int(cand[0])  # Bland: lowest index entering
        col = T[:m, c]
        pos = col > tol
        if not pos.any():
            raise LpUnbounded("objective unbounded below")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        r = int(ties[np.argmin(basis[ties])])  # Bland: lowest index leaving
        _pivot(T, r, c)
        basis[r] = c
    raise RuntimeError(f"simplex did not terminate in {max_iter} pivots")


def simplex_min(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None,
                tol: float = 1e-11, max_iter: int = 50_000) -> LpResult:
    """Minimise ``c @ x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    rows, rhs = [], []
    n_ub = 0
    if A_ub is not None and len(A_ub):
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        n_ub = A_ub.shape[0]
    m_eq = 0 if A_eq is None else np.atleast_2d(A_eq).shape[0]
    m = m_eq + n_ub
    # standard form columns: x (n), slacks (n_ub), artificials (m)
    A = np.zeros((m, n + n_ub))
    b = np.zeros(m)
    if m_eq:
        A[:m_eq, :n] = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b[:m_eq] = np.asarray(b_eq, dtype=float)
    if n_ub:
        A[m_eq:, :n] = A_ub
        A[m_eq:, n:] = np.eye(n_ub)
        b[m_eq:] = np.asarray(b_ub, dtype=float)
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    N = n + n_ub
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b
    basis = np.arange(N, N + m)
    # phase one: minimise the sum of artificials
    T[-1, :N] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    it1 = _run(T, basis, N + m, tol, max_iter)
    scale = max(1.0, float(np.abs(b).max()))
    if -T[-1, -1] > 1e-9 * scale:
        raise LpInfeasible(f"phase one ended with infeasibility {-T[-1, -1]:.3g}")
    # drive remaining artificials out of the basis where possible
    for r in range(m):
        if basis[r] >= N:
            nz = np.flatnonzero(np.abs(T[r, :N]) > tol)
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
    keep = basis < N
    T = np.vstack([T[:m][keep], np.zeros((1, T.shape[1]))])
    basis = basis[keep]
    T = np.delete(T, np.s_[N:N + m], axis=1)
    # phase two objective in reduced form
    cost = np.concatenate([c, np.zeros(n_ub)])
    T[-1, :N] = cost
    T[-1, -1] = 0.0
    for r, j in enumerate(basis):
        T[-1] -= cost[j] * T[r]
    it2 = _run(T, basis, N, tol, max_iter)
    x = np.zeros(N)
    x[basis] = T[:-1, -1]
    x = np.maximum(x, 0.0)
    return LpResult(x[:n], float(c @ x[:n]), it1 + it2, basis.copy())
