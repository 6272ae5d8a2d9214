"""Dense bounded-variable simplex for ``min c^T u  s.t.  A u >= b,  l <= u <= h``.

Each row gets a surplus variable ``s = A u - b >= 0``, so a basis consists
of ``m`` basic variables among the ``n`` structurals and ``m`` surpluses.
Every nonbasic structural sits on one of its bounds (or at zero when free),
and every nonbasic surplus is zero, i.e. its row is tight.

Writing ``P`` for the basic structurals and ``T`` for the tight rows
(``|P| == |T|``), all basis solves reduce to the ``|T| x |P|`` kernel
``A[T, P]``.  The kernel is at most ``n x n`` no matter how many rows the
model accumulates, which is what keeps node LPs with thousands of cuts
cheap.  Primal values and duals are recomputed every iteration from an
explicit kernel inverse that is updated after each pivot and rebuilt
periodically.

Memory is dominated by the dense row matrix, ``8 * m * n`` bytes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.linalg import LinAlgError

from . import _simplex
from ._simplex import FEAS_TOL, OPT_TOL

__all__ = [
    "FEAS_TOL",
    "OPT_TOL",
    "LpStatus",
    "LpModel",
    "LpSolution",
    "Basis",
    "add_rows",
    "solve",
]

class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


def _as_row(coeffs, n):
    if isinstance(coeffs, dict):
        row = np.zeros(n)
        for j, v in coeffs.items():
            if not 0 <= j < n:
                raise IndexError(f"row references variable {j}, model has {n}")
            row[j] = v
        return row
    row = np.asarray(coeffs, dtype=float)
    if row.shape != (n,):
        raise ValueError(f"row has shape {row.shape}, expected ({n},)")
    return row


@dataclass(frozen=True)
class LpModel:
    """Rows ``a[r] @ u >= rhs[r]`` stored densely.

    ``rows`` may be given as ``(coeffs, rhs)`` pairs where ``coeffs`` is a
    dense vector or a ``{index: value}`` mapping; :meth:`from_rows` builds
    the dense matrix.
    """

    objective: np.ndarray
    a: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = len(self.objective)
        if self.a.shape != (len(self.rhs), n):
            raise ValueError("row matrix shape does not match rhs / objective")
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bound vectors must have one entry per variable")
        both = np.isfinite(self.lower) & np.isfinite(self.upper)
        if np.any(self.lower[both] > self.upper[both]):
            raise ValueError("lower bound exceeds upper bound")

    @classmethod
    def from_rows(cls, objective, rows, lower, upper):
        objective = np.asarray(objective, dtype=float)
        n = len(objective)
        a = np.array([_as_row(c, n) for c, _ in rows], dtype=float).reshape(len(rows), n)
        rhs = np.array([r for _, r in rows], dtype=float)
        return cls(objective, a, rhs, np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def with_bounds(self, lower, upper) -> "LpModel":
        return LpModel(self.objective, self.a, self.rhs,
                       np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))


def add_rows(model: LpModel, rows) -> LpModel:
    """Append rows; an earlier basis stays a valid warm start (new surpluses are basic)."""
    if not rows:
        return model
    n = model.num_vars
    a_new = np.array([_as_row(c, n) for c, _ in rows], dtype=float)
    rhs_new = np.array([r for _, r in rows], dtype=float)
    return LpModel(model.objective, np.vstack([model.a, a_new]),
                   np.concatenate([model.rhs, rhs_new]), model.lower, model.upper)


@dataclass(frozen=True)
class Basis:
    """Opaque warm-start token.

    ``basic`` lists basic structurals, ``tight`` the rows whose surplus is
    nonbasic, and ``at_upper`` the nonbasic structurals sitting on their
    upper bound.  Rows added after the token was taken are implicitly loose.
    """

    basic: tuple
    tight: tuple
    at_upper: frozenset = field(default_factory=frozenset)


@dataclass
class LpSolution:
    status: LpStatus
    primal: np.ndarray
    objective_value: float
    basis: Basis | None
    iterations: int = 0
    reduced_costs: np.ndarray | None = None
    duals: np.ndarray | None = None
    method: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _load(A, basis: Basis, state, P, T, ppos, tpos, dims, kinv, lo, hi) -> bool:
    m, n = A.shape
    basic = [int(j) for j in basis.basic]
    tight = [int(r) for r in basis.tight]
    if len(basic) != len(tight) or len(basic) > len(P):
        return False
    if any(not 0 <= r < m for r in tight) or any(not 0 <= j < n for j in basic):
        return False
    _nonbasic_state(state, lo, hi, basis.at_upper)
    k = len(basic)
    P[:k] = basic
    T[:k] = tight
    ppos[basic] = np.arange(k)
    tpos[tight] = np.arange(k)
    state[basic] = _simplex.BASIC
    dims[0] = k
    return bool(_simplex.refactor(A, P, T, dims, kinv))


def _nonbasic_state(state, lo, hi, prefer_upper):
    lo_ok, hi_ok = np.isfinite(lo), np.isfinite(hi)
    state[:] = np.where(lo_ok, _simplex.LOWER, np.where(hi_ok, _simplex.UPPER, _simplex.ZERO))
    up = np.zeros(len(state), dtype=bool)
    if isinstance(prefer_upper, np.ndarray):
        up = prefer_upper
    elif prefer_upper:
        up[list(prefer_upper)] = True
    state[up & hi_ok] = _simplex.UPPER


_STATUS = {
    _simplex.OPTIMAL: LpStatus.OPTIMAL,
    _simplex.INFEASIBLE: LpStatus.INFEASIBLE,
    _simplex.UNBOUNDED: LpStatus.UNBOUNDED,
    _simplex.ITERATION_LIMIT: LpStatus.ITERATION_LIMIT,
}


def _solve_highs(model: LpModel, spent: int) -> LpSolution:
    """Last resort when the simplex loses accuracy on a badly conditioned kernel.

    The answer carries no basis, so the next solve starts cold.
    """
    from scipy.optimize import linprog

    bounds = [(None if math.isinf(l) else l, None if math.isinf(h) else h)
              for l, h in zip(model.lower, model.upper)]
    m, n = model.a.shape
    res = linprog(model.objective, A_ub=-model.a if m else None, b_ub=-model.rhs if m else None,
                  bounds=bounds, method="highs")
    status = {0: LpStatus.OPTIMAL, 1: LpStatus.ITERATION_LIMIT, 2: LpStatus.INFEASIBLE,
              3: LpStatus.UNBOUNDED}.get(res.status)
    if status is None:
        raise LinAlgError(f"fallback LP solver failed: {res.message}")
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, np.full(n, math.nan), math.nan, None, spent, method="highs fallback")
    u = np.clip(res.x, model.lower, model.upper)
    y = -res.ineqlin.marginals if m else np.zeros(0)
    d = res.lower.marginals + res.upper.marginals
    return LpSolution(status, u, float(model.objective @ u), None, spent + int(res.nit), d, y, "highs fallback")


def solve(model: LpModel, warm_start: Basis | None = None, *, max_iter: int | None = None) -> LpSolution:
    """Solve ``model`` to an optimal basic solution.

    A cold start runs the primal simplex (composite phase 1, then phase 2)
    from the all-surplus basis.  A warm start restores ``warm_start`` and
    reoptimizes with the dual simplex when the basis is dual feasible, which
    is the case after adding rows or tightening bounds; otherwise it falls
    back to the primal simplex from that basis.

    Without an explicit ``max_iter``, a model the simplex cannot finish
    (singular kernel or exhausted budget, warm and cold) is handed to HiGHS;
    such solutions report ``method == "highs fallback"`` and carry no basis.
    """
    A = np.ascontiguousarray(model.a, dtype=float)
    b = np.ascontiguousarray(model.rhs, dtype=float)
    c = np.ascontiguousarray(model.objective, dtype=float)
    lo = np.ascontiguousarray(model.lower, dtype=float)
    hi = np.ascontiguousarray(model.upper, dtype=float)
    m, n = A.shape
    fixed = lo == hi
    cap = min(m, n)
    limit = max_iter if max_iter is not None else 50 * (n + m)

    state = np.empty(n, dtype=np.int8)
    P = np.full(max(cap, 1), -1, dtype=np.int64)
    T = np.full(max(cap, 1), -1, dtype=np.int64)
    ppos = np.full(n, -1, dtype=np.int64)
    tpos = np.full(m, -1, dtype=np.int64)
    dims = np.zeros(3, dtype=np.int64)
    kinv = np.zeros((max(cap, 1), max(cap, 1)))
    args = (A, b, c, lo, hi, fixed, state, P, T, ppos, tpos, dims, kinv, limit)

    code = None
    method = "primal"
    if warm_start is not None and _load(A, warm_start, state, P, T, ppos, tpos, dims, kinv, lo, hi):
        if _simplex.make_dual_feasible(A, c, lo, hi, fixed, state, tpos, P, T, dims, kinv):
            method = "dual"
            code = _simplex.run_dual(*args)
        else:
            code = _simplex.run_primal(*args)
    spent = 0
    if code is None or code in (_simplex.SINGULAR, _simplex.ITERATION_LIMIT):
        # cold start from the all-surplus basis, cheap side of every box first;
        # a failed warm start does not eat into its budget
        spent = int(dims[1])
        P[:] = -1
        T[:] = -1
        ppos[:] = -1
        tpos[:] = -1
        dims[:] = 0
        _nonbasic_state(state, lo, hi, c < 0)
        method = "primal" if code is None else "primal (warm start abandoned)"
        code = _simplex.run_primal(*args)
        if code in (_simplex.SINGULAR, _simplex.ITERATION_LIMIT) and max_iter is None:
            return _solve_highs(model, spent + int(dims[1]))
        if code == _simplex.SINGULAR:
            raise LinAlgError("basis kernel became singular")

    u = np.empty(n)
    s = np.empty(m)
    y = np.empty(m)
    d = np.empty(n)
    _simplex.primal_values(A, b, lo, hi, state, P, T, dims, kinv, u, s)
    _simplex.duals(A, c, y, False, tpos, P, T, dims, kinv, y, d)
    status = _STATUS[int(code)]
    obj = float(c @ u) if status is LpStatus.OPTIMAL else math.nan
    k = int(dims[0])
    at_upper = frozenset(int(j) for j in np.flatnonzero(state == _simplex.UPPER))
    basis = Basis(tuple(int(j) for j in P[:k]), tuple(int(r) for r in T[:k]), at_upper)
    return LpSolution(status, u, obj, basis, spent + int(dims[1]), d, y, method)
