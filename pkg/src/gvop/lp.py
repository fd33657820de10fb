"""Dense two-phase simplex for the small LPs used by oracles and checkers.

Pivoting follows Bland's least-index rule, so runs are deterministic and
cannot cycle.  Good enough up to a couple of thousand variables.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

Row = Union[Sequence[float], Mapping[int, float]]

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
ITER_FACTOR = 50  # pivot cap per row + column


class NumericalError(RuntimeError):
    """Pivoting exceeded the iteration cap."""


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """``max`` (or ``min``) ``c @ x`` s.t. rows ``(coeffs, rel, rhs)``, ``x >= lower``.

    ``rel`` is one of ``"<="``, ``"="``, ``">="``.  Rows may be dense
    sequences or sparse ``{column: coefficient}`` mappings.
    """

    objective: Sequence[float]
    constraints: List[Tuple[Row, str, float]] = field(default_factory=list)
    maximize: bool = True
    lower: Optional[Sequence[float]] = None

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def add(self, coeffs: Row, rel: str, rhs: float) -> None:
        self.constraints.append((coeffs, rel, rhs))

    def dense(self):
        n = self.num_vars
        m = len(self.constraints)
        A = np.zeros((m, n))
        b = np.zeros(m)
        rels = []
        for i, (row, rel, rhs) in enumerate(self.constraints):
            if rel not in ("<=", "=", ">="):
                raise ValueError(f"unknown relation {rel!r}")
            if isinstance(row, Mapping):
                for j, a in row.items():
                    A[i, j] += a
            else:
                if len(row) != n:
                    raise ValueError(f"row {i} has {len(row)} coefficients, expected {n}")
                A[i] = row
            b[i] = rhs
            rels.append(rel)
        return A, b, rels


@dataclass
class LPResult:
    """Solver outcome.

    ``reduced_costs`` (structural columns) and ``slack_reduced_costs`` (one
    per constraint, ``None`` for equalities) are taken from the final
    tableau of the minimisation form; a positive entry means the variable
    or slack is zero in every optimal solution.
    """

    status: LPStatus
    value: Optional[float] = None
    x: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    slack_reduced_costs: Optional[List[Optional[float]]] = None

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def _pivot(T, basis, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.nonzero(np.abs(col) > 0)[0]
    if len(nz):
        T[nz] -= np.outer(col[nz], T[r])
    basis[r] = c


def _run(T, basis, ncols, cap, it):
    """Bland iterations on tableau ``T`` over columns ``[0, ncols)``.

    The last row holds reduced costs of a minimization; returns
    ``(unbounded, iterations)``.
    """
    m = T.shape[0] - 1
    while True:
        red = T[-1, :ncols]
        cand = np.nonzero(red < -PIVOT_TOL)[0]
        if not len(cand):
            return False, it
        c = int(cand[0])
        colv = T[:m, c]
        pos = np.nonzero(colv > PIVOT_TOL)[0]
        if not len(pos):
            return True, it
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, basis, r, c)
        it += 1
        if it > cap:
            raise NumericalError(f"simplex exceeded {cap} pivots")


def solve(lp: LinearProgram) -> LPResult:
    n = lp.num_vars
    A, b, rels = lp.dense()
    c = np.asarray(lp.objective, dtype=float)
    if lp.maximize:
        c = -c
    lower = np.zeros(n) if lp.lower is None else np.asarray(lp.lower, dtype=float)
    shift = float(c @ lower)
    b = b - A @ lower
    m = len(b)

    # rhs >= 0
    rels = list(rels)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            rels[i] = {"<=": ">=", ">=": "<=", "=": "="}[rels[i]]

    n_slack = sum(1 for r in rels if r != "=")
    n_art = sum(1 for r in rels if r != "<=")
    total = n + n_slack + n_art
    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = [0] * m
    s = n
    a = n + n_slack
    art_cols = []
    slack_col: List[Optional[int]] = [None] * m
    for i, rel in enumerate(rels):
        if rel == "<=":
            T[i, s] = 1.0
            basis[i] = s
            slack_col[i] = s
            s += 1
        else:
            if rel == ">=":
                T[i, s] = -1.0
                slack_col[i] = s
                s += 1
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1

    cap = ITER_FACTOR * (m + total)
    it = 0

    if art_cols:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        for i in range(m):
            if basis[i] >= n + n_slack:
                T[-1, :] -= T[i, :]
        for j in art_cols:
            T[-1, j] = 0.0
        _, it = _run(T, basis, total, cap, it)
        if -T[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LPResult(LPStatus.INFEASIBLE)
        keep = []
        for i in range(m):
            if basis[i] >= n + n_slack:
                nz = np.nonzero(np.abs(T[i, :n + n_slack]) > PIVOT_TOL)[0]
                if len(nz):
                    _pivot(T, basis, i, int(nz[0]))
                    keep.append(i)
                # else: redundant row, dropped
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.delete(T, range(n + n_slack, total), axis=1)
        m = len(basis)

    width = n + n_slack
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i in range(m):
        cb = T[-1, basis[i]]
        if cb != 0.0:
            T[-1, :] -= cb * T[i, :]
    unbounded, it = _run(T, basis, width, cap, it)
    if unbounded:
        return LPResult(LPStatus.UNBOUNDED)

    x = np.zeros(width)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = x[:n] + lower
    value = float(np.asarray(lp.objective, dtype=float) @ x)
    red = T[-1, :width].copy()
    slack_red = [None if j is None else float(red[j]) for j in slack_col]
    return LPResult(LPStatus.OPTIMAL, value, x, red[:n], slack_red)


def check_feasible(lp: LinearProgram, x, tol: float = FEAS_TOL) -> bool:
    A, b, rels = lp.dense()
    lhs = A @ np.asarray(x, dtype=float)
    lower = np.zeros(lp.num_vars) if lp.lower is None else np.asarray(lp.lower, dtype=float)
    if np.any(np.asarray(x) < lower - tol):
        return False
    for v, rhs, rel in zip(lhs, b, rels):
        scale = max(1.0, abs(rhs))
        if rel == "<=" and v > rhs + tol * scale:
            return False
        if rel == ">=" and v < rhs - tol * scale:
            return False
        if rel == "=" and abs(v - rhs) > tol * scale:
            return False
    return True
