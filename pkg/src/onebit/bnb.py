"""Outer-approximation branch-and-bound for ``min sum_i g_i(b_i^T x)``, ``x in {-1,1}^N``.

Each convex term is replaced by an epigraph variable ``w_i`` bounded below
by tangent cuts ``w_i >= g_i(xh) + <grad g_i(xh), x - xh>``.  The node LP
minimizes ``sum w`` over the box with some coordinates fixed.  Cuts are
generated lazily at integral LP points and shared by every node.

Two entry points:

* :func:`solve_global` embeds cut generation inside a single tree search.
* :func:`solve_alg1` is the reference scheme: solve the relaxed MILP over a
  frozen cut pool to optimality, separate at its optimum, repeat.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lp
from .detectors import RankDeficient, least_squares
from .links import LinkFunction, link_eval
from .model import RealInstance, sgn

__all__ = [
    "Cut",
    "Node",
    "SolverOptions",
    "SolveStats",
    "GlobalResult",
    "make_cut",
    "separate",
    "initial_cut_pool",
    "CutPool",
    "solve_global",
    "solve_alg1",
]


# LP matrix entries below this are dropped (with a compensating offset shift)
SMALL_COEFF = 1e-9


@dataclass(frozen=True)
class Cut:
    """``w_row >= offset + <coeffs, x>``; ``anchor`` is None for exact hinge pieces."""

    row: int
    anchor: np.ndarray | None
    offset: float
    coeffs: np.ndarray

    def value(self, x) -> float:
        return self.offset + float(self.coeffs @ x)


@dataclass(frozen=True)
class Node:
    fixed_plus: frozenset
    fixed_minus: frozenset
    inherited_bound: float
    depth: int = 0
    warm: lp.Basis | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.fixed_plus & self.fixed_minus:
            raise ValueError("a coordinate cannot be fixed to both +1 and -1")


@dataclass
class SolverOptions:
    node_limit: int = 1_000_000
    time_limit_ms: float | None = None
    integrality_tol: float = 1e-6
    violation_tol: float = 1e-7
    incumbent_shortcut: bool = True
    mode: str = "alg2"
    max_n: int = 64
    prune_tol: float = 1e-9


@dataclass
class SolveStats:
    nodes_processed: int = 0
    lp_solves: int = 0
    lp_iterations: int = 0
    # node LPs the simplex could not finish accurately, handed to HiGHS
    lp_fallbacks: int = 0
    cuts_generated: int = 0
    pool_size: int = 0
    cut_pool_ratio: float = 0.0
    wall_time: float = 0.0
    max_cut_rounds: int = 0
    outer_iterations: int = 1
    root_bound: float = math.nan
    # largest observed drop of a child's first LP value below its parent's
    bound_drop: float = 0.0
    proven_optimal: bool = True


@dataclass
class GlobalResult:
    x_opt: np.ndarray
    objective: float
    stats: SolveStats

    @property
    def proven_optimal(self) -> bool:
        return self.stats.proven_optimal

    def stats_dict(self) -> dict:
        return asdict(self.stats)


def make_cut(instance: RealInstance, link: LinkFunction, row: int, anchor) -> Cut:
    anchor = np.asarray(anchor, dtype=float)
    b = instance.b[row]
    t = float(b @ anchor)
    g, gp = link_eval(link, t)
    coeffs = float(gp) * b
    return Cut(row, anchor, float(g) - float(gp) * t, coeffs)


def separate(instance: RealInstance, link: LinkFunction, x_bar, w_bar, violation_tol: float = 1e-7) -> list:
    """Tangent cuts at ``x_bar`` for every row with ``w_bar[i] < g_i(x_bar) - tol``."""
    x_bar = np.asarray(x_bar, dtype=float)
    g, _ = link_eval(link, instance.b @ x_bar)
    rows = np.flatnonzero(np.asarray(w_bar) < g - violation_tol)
    return [make_cut(instance, link, int(i), x_bar) for i in rows]


def initial_cut_pool(instance: RealInstance, link: LinkFunction) -> list:
    """Starting cuts: exact hinge pieces for AR-L1, else tangents at quantized ZF."""
    if link.piecewise_linear:
        n = instance.n
        cuts = []
        for i in range(instance.m):
            cuts.append(Cut(i, None, 0.0, -instance.b[i].copy()))
            cuts.append(Cut(i, None, 0.0, np.zeros(n)))
        return cuts
    try:
        anchor = sgn(least_squares(instance.h, instance.r))
    except RankDeficient:
        # any anchor yields valid cuts; the minimum-norm fit is a fine one
        anchor = sgn(np.linalg.lstsq(instance.h, instance.r, rcond=None)[0])
    return [make_cut(instance, link, i, anchor) for i in range(instance.m)]


class CutPool:
    """Global cut store backing the node LPs; rows are ``w_i - coeffs @ x >= offset``."""

    def __init__(self, n: int, m: int, capacity: int = 256):
        self.n, self.m = n, m
        self._a = np.zeros((capacity, n + m))
        self._rhs = np.zeros(capacity)
        self.cuts: list[Cut] = []
        self._seen: set = set()

    def __len__(self):
        return len(self.cuts)

    def add(self, cut: Cut) -> bool:
        if cut.anchor is not None:
            # anchors are sign vectors, so byte equality is the 1e-9 duplicate test
            key = (cut.row, np.round(cut.anchor, 9).tobytes())
            if key in self._seen:
                return False
            self._seen.add(key)
        k = len(self.cuts)
        if k == len(self._rhs):
            self._a = np.vstack([self._a, np.zeros_like(self._a)])
            self._rhs = np.concatenate([self._rhs, np.zeros_like(self._rhs)])
        # entries this small only wreck the LP's conditioning; over the box
        # |x_j| <= 1, so lowering the offset by their mass keeps the row valid
        coeffs = cut.coeffs.copy()
        small = np.abs(coeffs) < SMALL_COEFF
        slack = float(np.sum(np.abs(coeffs[small])))
        coeffs[small] = 0.0
        self._a[k, : self.n] = -coeffs
        self._a[k, self.n:] = 0.0
        self._a[k, self.n + cut.row] = 1.0
        self._rhs[k] = cut.offset - slack
        self.cuts.append(cut)
        return True

    def extend(self, cuts) -> int:
        return sum(self.add(c) for c in cuts)

    def model(self, lower, upper) -> lp.LpModel:
        k = len(self.cuts)
        c = np.concatenate([np.zeros(self.n), np.ones(self.m)])
        return lp.LpModel(c, self._a[:k], self._rhs[:k], lower, upper)


def _ratio(pool_size: int, m: int, n: int) -> float:
    if pool_size == 0:
        return 0.0
    return math.exp(math.log(pool_size) - math.log(m) - n * math.log(2.0))


def _true_objective(instance, link, x) -> tuple[float, np.ndarray]:
    g, _ = link_eval(link, instance.b @ x)
    return float(np.sum(g)), g


def _tree_search(instance, link, pool: CutPool, opts: SolverOptions, stats: SolveStats,
                 generate_cuts: bool, deadline: float | None):
    """Best-first search; returns ``(x, w, U)`` of the incumbent (``x`` None if none)."""
    n, m = instance.n, instance.m
    lower0 = np.concatenate([-np.ones(n), np.zeros(m)])
    upper0 = np.concatenate([np.ones(n), np.full(m, np.inf)])
    best_x, best_w, upper = None, None, math.inf
    counter = itertools.count()
    heap = [(-math.inf, 0, next(counter), Node(frozenset(), frozenset(), -math.inf))]
    int_tol = opts.integrality_tol

    while heap:
        if stats.nodes_processed >= opts.node_limit or (deadline is not None and time.perf_counter() > deadline):
            stats.proven_optimal = False
            break
        bound, _, _, node = heapq.heappop(heap)
        if bound >= upper - opts.prune_tol:
            continue
        stats.nodes_processed += 1
        lower, upper_b = lower0.copy(), upper0.copy()
        for j in node.fixed_plus:
            lower[j] = 1.0
        for j in node.fixed_minus:
            upper_b[j] = -1.0
        warm = node.warm
        rounds = 0
        first = True
        while True:
            sol = lp.solve(pool.model(lower, upper_b), warm)
            stats.lp_solves += 1
            stats.lp_iterations += sol.iterations
            stats.lp_fallbacks += sol.method == "highs fallback"
            if not sol.optimal:
                raise RuntimeError(f"node LP ended with status {sol.status.value}")
            warm = sol.basis
            f_lp = sol.objective_value
            if first:
                if node.depth == 0 and math.isnan(stats.root_bound):
                    stats.root_bound = f_lp
                if math.isfinite(node.inherited_bound):
                    stats.bound_drop = max(stats.bound_drop, node.inherited_bound - f_lp)
                first = False
            if f_lp >= upper - opts.prune_tol:
                break  # case (i)
            x = sol.primal[:n]
            w = sol.primal[n:]
            if np.all(np.abs(x) >= 1.0 - int_tol):
                xi = sgn(x)
                if not generate_cuts:
                    best_x, best_w, upper = xi, w.copy(), f_lp
                    break
                f_true, g = _true_objective(instance, link, xi)
                if opts.incumbent_shortcut and f_true < upper:
                    best_x, best_w, upper = xi, g, f_true
                violated = np.flatnonzero(w < g - opts.violation_tol)
                added = 0
                if len(violated):
                    added = pool.extend(make_cut(instance, link, int(i), xi) for i in violated)
                    stats.cuts_generated += added
                if added == 0:
                    # case (ii.1); U is the recomputed objective at the integral point
                    if f_true < upper:
                        best_x, best_w, upper = xi, g, f_true
                    break
                rounds += 1
                stats.max_cut_rounds = max(stats.max_cut_rounds, rounds)
                continue  # case (ii.2): re-solve the same node
            # case (iii): branch on the most fractional free coordinate
            free = np.ones(n, dtype=bool)
            free[list(node.fixed_plus | node.fixed_minus)] = False
            score = np.where(free, np.abs(x), np.inf)
            j = int(np.argmin(score))
            depth = node.depth + 1
            for child in (Node(node.fixed_plus | {j}, node.fixed_minus, f_lp, depth, warm),
                          Node(node.fixed_plus, node.fixed_minus | {j}, f_lp, depth, warm)):
                heapq.heappush(heap, (f_lp, -depth, next(counter), child))
            break
    return best_x, best_w, upper


def _check_size(instance, opts):
    if instance.n > opts.max_n:
        raise ValueError(f"N = {instance.n} exceeds solver cap max_n = {opts.max_n}")


def solve_global(instance: RealInstance, link: LinkFunction, opts: SolverOptions | None = None) -> GlobalResult:
    """Globally minimize ``sum_i g_i(b_i^T x)`` over ``{-1, 1}^N``.

    Node LP results are handled as: prune when the bound reaches the
    incumbent; at an integral point either accept it or add the violated
    tangent cuts and re-solve the node; otherwise branch.  With
    ``opts.mode == "alg1"`` this forwards to :func:`solve_alg1`.
    """
    opts = opts or SolverOptions()
    if opts.mode == "alg1":
        return solve_alg1(instance, link, opts)
    _check_size(instance, opts)
    t0 = time.perf_counter()
    deadline = None if opts.time_limit_ms is None else t0 + opts.time_limit_ms / 1000.0
    stats = SolveStats()
    pool = CutPool(instance.n, instance.m)
    pool.extend(initial_cut_pool(instance, link))
    x, _, _ = _tree_search(instance, link, pool, opts, stats, True, deadline)
    return _finish(instance, link, x, pool, stats, t0)


def solve_alg1(instance: RealInstance, link: LinkFunction, opts: SolverOptions | None = None) -> GlobalResult:
    """Delayed constraint generation around exact relaxed-MILP solves."""
    opts = opts or SolverOptions()
    _check_size(instance, opts)
    t0 = time.perf_counter()
    deadline = None if opts.time_limit_ms is None else t0 + opts.time_limit_ms / 1000.0
    stats = SolveStats(outer_iterations=0)
    pool = CutPool(instance.n, instance.m)
    pool.extend(initial_cut_pool(instance, link))
    x = None
    while True:
        stats.outer_iterations += 1
        x, w, _ = _tree_search(instance, link, pool, opts, stats, False, deadline)
        if x is None or not stats.proven_optimal:
            break
        new = separate(instance, link, x, w, opts.violation_tol)
        added = pool.extend(new)
        stats.cuts_generated += added
        if added == 0:
            break
    return _finish(instance, link, x, pool, stats, t0)


def _finish(instance, link, x, pool, stats, t0) -> GlobalResult:
    stats.wall_time = time.perf_counter() - t0
    stats.pool_size = len(pool)
    stats.cut_pool_ratio = _ratio(len(pool), instance.m, instance.n)
    if x is None:
        stats.proven_optimal = False
        return GlobalResult(np.ones(instance.n), math.inf, stats)
    f, _ = _true_objective(instance, link, x)
    return GlobalResult(x, f, stats)
