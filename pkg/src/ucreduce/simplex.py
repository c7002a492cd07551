"""Dense-tableau two-phase primal simplex.

Problems are given in the general form

    min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub

and converted to standard form internally (shifted, reflected or split
columns; finite upper bounds become rows). Entering columns follow
Dantzig's rule; after a run of degenerate pivots the rule falls back to
Bland's smallest-index rule, which cannot cycle. Meant for small
problems: the tableau is dense.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError

PIVOT_FLOOR = 1e-11
FEAS_TOL = 1e-6
RATIO_TOL = 1e-9  # smallest column entry allowed to bound a ratio-test step
COST_TOL = 1e-9
PHASE1_TOL = 1e-7
DEGENERATE_RUN = 20


def _dense(A, n):
    if A is None:
        return np.zeros((0, n))
    if sp.issparse(A):
        return A.toarray().astype(float)
    return np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, n)


class _Tableau:
    """Rows 0..m-1 are constraints, row m is the reduced-cost row.

    The last column holds the right-hand side (and minus the objective in
    the cost row).
    """

    def __init__(self, T, basis):
        self.T = T
        self.basis = basis
        self.iterations = 0

    def pivot(self, r, j):
        T = self.T
        piv = T[r, j]
        if abs(piv) < PIVOT_FLOOR:
            raise NumericalError(f"pivot magnitude {abs(piv):.3e} below {PIVOT_FLOOR}")
        T[r] /= piv
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed, max_iter):
        """Iterate to optimality over columns in ``allowed``; return 'optimal' or 'unbounded'."""
        T = self.T
        m = T.shape[0] - 1
        degenerate = 0
        while True:
            if self.iterations > max_iter:
                raise NumericalError("simplex iteration cap reached")
            d = T[m, :-1]
            cand = np.flatnonzero((d < -COST_TOL) & allowed)
            if cand.size == 0:
                return "optimal"
            if degenerate >= DEGENERATE_RUN:
                j = int(cand[0])
            else:
                j = int(cand[np.argmin(d[cand])])
            col = T[:m, j]
            pos = col > RATIO_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = T[:m, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            # Bland tie-break on the leaving variable: smallest basic index
            r = int(min(ties, key=lambda i: self.basis[i]))
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            self.pivot(r, j)


def simplex_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
                  max_iter=50_000):
    """Solve the LP; return ``(status, x, objective)``.

    ``status`` is one of ``"optimal"``, ``"infeasible"``, ``"unbounded"``;
    ``x`` and ``objective`` are ``None`` unless optimal.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = _dense(A_ub, n)
    A_eq = _dense(A_eq, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)

    if np.any(lb > ub):
        return "infeasible", None, None

    # x = shift + M y, y >= 0
    cols = []
    shift = np.zeros(n)
    extra_rows = []
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    M = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    rows_le = [A_ub @ M]
    rhs_le = [b_ub - A_ub @ shift]
    if extra_rows:
        E = np.zeros((len(extra_rows), ny))
        for i, (k, width) in enumerate(extra_rows):
            E[i, k] = 1.0
        rows_le.append(E)
        rhs_le.append(np.array([w for _, w in extra_rows]))
    Ale = np.vstack(rows_le)
    ble = np.concatenate(rhs_le)
    Aeq = A_eq @ M
    beq = b_eq - A_eq @ shift
    cy = M.T @ c

    m_le, m_eq = Ale.shape[0], Aeq.shape[0]
    m = m_le + m_eq
    # column layout: y | slacks (one per le row) | artificials
    n_slack = m_le
    art_rows = [i for i in range(m_le) if ble[i] < 0] + list(range(m_le, m))
    n_art = len(art_rows)
    width = ny + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    basis = [0] * m
    for i in range(m_le):
        sign = -1.0 if ble[i] < 0 else 1.0
        T[i, :ny] = sign * Ale[i]
        T[i, ny + i] = sign
        T[i, -1] = sign * ble[i]
        basis[i] = ny + i
    for k, i in enumerate(range(m_le, m)):
        sign = -1.0 if beq[k] < 0 else 1.0
        T[i, :ny] = sign * Aeq[k]
        T[i, -1] = sign * beq[k]
    for a, i in enumerate(art_rows):
        T[i, ny + n_slack + a] = 1.0
        basis[i] = ny + n_slack + a

    tab = _Tableau(T, basis)
    allowed = np.ones(width, dtype=bool)
    if n_art:
        T[m, :] = 0.0
        T[m, ny + n_slack:width] = 1.0
        for i in art_rows:
            T[m] -= T[i]
        tab.run(allowed, max_iter)
        scale = max(1.0, float(np.abs(T[:m, -1]).max(initial=0.0)))
        if -T[m, -1] > PHASE1_TOL * scale:
            return "infeasible", None, None
        # drive remaining artificials out of the basis
        keep = np.ones(m + 1, dtype=bool)
        for i in range(m):
            if tab.basis[i] >= ny + n_slack:
                row = np.abs(T[i, :ny + n_slack])
                j = int(np.argmax(row)) if row.size else 0
                if row.size and row[j] > RATIO_TOL:
                    tab.pivot(i, j)
                else:
                    keep[i] = False  # redundant row
        if not keep.all():
            tab.T = T = T[keep]
            tab.basis = [b for b, k in zip(tab.basis, keep[:-1]) if k]
            m = T.shape[0] - 1
        allowed[ny + n_slack:] = False

    T[m, :] = 0.0
    T[m, :ny] = cy
    for i, bcol in enumerate(tab.basis):
        if T[m, bcol] != 0.0:
            T[m] -= T[m, bcol] * T[i]
    status = tab.run(allowed, max_iter)
    if status == "unbounded":
        return "unbounded", None, None

    y = np.zeros(width)
    for i, bcol in enumerate(tab.basis):
        y[bcol] = T[i, -1]
    x = shift + M @ y[:ny]
    x = np.clip(x, lb, ub)
    # accumulated round-off shows up as row violations; refuse to return them
    viol = 0.0
    if A_ub.shape[0]:
        viol = float(np.max((A_ub @ x - b_ub) / np.maximum(1.0, np.abs(b_ub)), initial=0.0))
    if A_eq.shape[0]:
        viol = max(viol, float(np.max(np.abs(A_eq @ x - b_eq) / np.maximum(1.0, np.abs(b_eq)))))
    if viol > FEAS_TOL:
        raise NumericalError(f"simplex solution violates a row by {viol:.3e} (relative)")
    return "optimal", x, float(c @ x)
