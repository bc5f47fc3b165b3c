"""Dense two-phase simplex for the small box-bounded LPs built over cut polytopes.

Solves  minimize c.x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  0 <= x <= ub.
Upper bounds are handled as explicit rows, all tie-breaking is by lowest index,
and the pivot rule falls back to Bland's rule after a stall, so the solver is
deterministic and cannot cycle. Problem sizes here stay within a few hundred
rows, where a dense tableau is the simplest reliable choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
STALL_LIMIT = 100
MAX_ITER = 50_000


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None = None
    x: np.ndarray | None = None


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def _choose_entering(z: np.ndarray, allowed: int, bland: bool) -> int | None:
    reduced = z[:allowed]
    if bland:
        idx = np.nonzero(reduced < -PIVOT_TOL)[0]
        return int(idx[0]) if idx.size else None
    j = int(np.argmin(reduced))
    return j if reduced[j] < -PIVOT_TOL else None


def _choose_leaving(T: np.ndarray, basis: np.ndarray, col: int) -> int | None:
    coefs = T[:-1, col]
    rhs = T[:-1, -1]
    eligible = coefs > PIVOT_TOL
    if not eligible.any():
        return None
    ratios = np.full(coefs.shape, np.inf)
    ratios[eligible] = rhs[eligible] / coefs[eligible]
    best = ratios.min()
    ties = np.nonzero(ratios <= best + PIVOT_TOL)[0]
    # Bland-compatible tie-break: smallest basic variable index
    return int(ties[np.argmin(basis[ties])])


def _run_simplex(T: np.ndarray, basis: np.ndarray, allowed: int) -> str:
    """Iterate to optimality over columns [0, allowed). Returns 'optimal' or 'unbounded'."""
    bland = False
    stall = 0
    last_obj = T[-1, -1]
    for _ in range(MAX_ITER):
        col = _choose_entering(T[-1], allowed, bland)
        if col is None:
            return "optimal"
        row = _choose_leaving(T, basis, col)
        if row is None:
            return "unbounded"
        _pivot(T, basis, row, col)
        if not bland:
            # T[-1, -1] holds minus the objective, so progress pushes it up
            if T[-1, -1] > last_obj + PIVOT_TOL:
                last_obj = T[-1, -1]
                stall = 0
            else:
                stall += 1
                if stall > STALL_LIMIT:
                    bland = True
    raise RuntimeError("simplex iteration limit exceeded")


def solve_canonical(
    c: np.ndarray,
    A_ub: np.ndarray,
    b_ub: np.ndarray,
    A_eq: np.ndarray,
    b_eq: np.ndarray,
    ub: np.ndarray,
) -> SimplexResult:
    """Minimize c.x subject to A_ub x <= b_ub, A_eq x = b_eq, 0 <= x <= ub."""
    n = c.size
    if n == 0:
        feasible = (b_ub >= -FEAS_TOL).all() and (np.abs(b_eq) <= FEAS_TOL).all()
        if feasible:
            return SimplexResult("optimal", 0.0, np.zeros(0))
        return SimplexResult("infeasible")

    finite_ub = np.nonzero(np.isfinite(ub))[0]
    A1 = np.vstack([A_ub, np.eye(n)[finite_ub]]) if finite_ub.size else A_ub
    b1 = np.concatenate([b_ub, ub[finite_ub]]) if finite_ub.size else b_ub

    n_ub, n_eq = A1.shape[0], A_eq.shape[0]
    m = n_ub + n_eq
    A = np.vstack([A1, A_eq]) if n_eq else A1
    b = np.concatenate([b1, b_eq]) if n_eq else b1
    is_ineq = np.zeros(m, dtype=bool)
    is_ineq[:n_ub] = True

    # slack per inequality row; flip rows to make rhs nonnegative
    slack_sign = np.where(is_ineq, 1.0, 0.0)
    flip = b < 0
    A = np.where(flip[:, None], -A, A)
    b = np.where(flip, -b, b)
    slack_sign = np.where(flip, -slack_sign, slack_sign)

    # artificial for every row whose slack cannot serve as the initial basic var
    needs_art = ~(is_ineq & ~flip)
    art_rows = np.nonzero(needs_art)[0]
    n_slack, n_art = n_ub, art_rows.size
    width = n + n_slack + n_art + 1

    T = np.zeros((m + 1, width))
    T[:m, :n] = A
    for r in range(n_ub):
        T[r, n + r] = slack_sign[r]
    for k, r in enumerate(art_rows):
        T[r, n + n_slack + k] = 1.0
    T[:m, -1] = b

    basis = np.empty(m, dtype=np.intp)
    basis[~needs_art] = n + np.nonzero(~needs_art)[0]
    basis[art_rows] = n + n_slack + np.arange(n_art)

    # phase 1: minimize the sum of artificials
    T[-1] = 0.0
    T[-1, n + n_slack : n + n_slack + n_art] = 1.0
    for r in art_rows:
        T[-1] -= T[r]
    status = _run_simplex(T, basis, n + n_slack + n_art)
    if status != "optimal" or -T[-1, -1] > FEAS_TOL:
        return SimplexResult("infeasible")

    # drive leftover artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n + n_slack:
            piv_cols = np.nonzero(np.abs(T[r, : n + n_slack]) > PIVOT_TOL)[0]
            if piv_cols.size:
                _pivot(T, basis, r, int(piv_cols[0]))
            else:
                keep[r] = False
    if not keep.all():
        T = np.vstack([T[:-1][keep], T[-1:]])
        basis = basis[keep]

    # phase 2 on the true objective, artificial columns barred
    T[-1] = 0.0
    T[-1, :n] = c
    for r, bv in enumerate(basis):
        if bv < n and abs(c[bv]) > 0:
            T[-1] -= c[bv] * T[r]
    status = _run_simplex(T, basis, n + n_slack)
    if status == "unbounded":
        return SimplexResult("unbounded")

    x = np.zeros(n)
    for r, bv in enumerate(basis):
        if bv < n:
            x[bv] = T[r, -1]
    np.clip(x, 0.0, None, out=x)
    return SimplexResult("optimal", float(c @ x), x)
