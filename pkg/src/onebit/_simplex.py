"""Compiled kernels of the bounded-variable simplex used by :mod:`onebit.lp`.

Problem: ``min c^T u  s.t.  A u >= b,  lo <= u <= hi`` with one surplus
``s = A u - b >= 0`` per row.  Basic structurals ``P[:k]`` and tight rows
``T[:k]`` define the ``k x k`` kernel ``A[T, P]`` whose explicit inverse is
kept in ``kinv[:k, :k]`` (rows follow ``P``, columns follow ``T``).  Pivots
update the inverse in O(k^2); it is rebuilt every ``REFACTOR_EVERY`` pivots.

Shared mutable state is passed around as plain arrays:

* ``state[j]``: BASIC / LOWER / UPPER / ZERO for each structural
* ``ppos[j]``: position of ``j`` in ``P`` or -1; ``tpos[i]``: same for rows
* ``dims``: ``[k, iterations, updates since refactor]``
"""

from __future__ import annotations

import numpy as np
from numba import njit

FEAS_TOL = 1e-9
ROW_TOL = 1e-8
OPT_TOL = 1e-9
PIVOT_TOL = 1e-7
# fallback pivot tolerance when skipping small rates would break feasibility
TINY_PIVOT_TOL = 1e-11
SINGULAR_TOL = 1e-11
# pivots below this share of the kernel scale are dropped by a basis repair
REPAIR_TOL = 1e-9
# repairs allowed per primal solve before giving up
MAX_REPAIRS = 20
# kernels whose estimated condition number exceeds this are treated as singular
COND_LIMIT = 1e11
DEGENERATE_STEP = 1e-12
# Harris ratio tests relax bounds by this share of the tolerance that
# flags infeasibility, so their overshoot never reopens phase 1
HARRIS = 0.5
# relative objective change below which a pivot counts as stalled
PROGRESS_TOL = 1e-9
REFACTOR_EVERY = 64

BASIC, LOWER, UPPER, ZERO = 0, 1, 2, 3

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT, SINGULAR = 0, 1, 2, 3, 4

# dims slots
_K, _ITERS, _UPDATES = 0, 1, 2


@njit(cache=True)
def _progressed(value, best, minimize):
    if not np.isfinite(best):
        return True
    gap = PROGRESS_TOL * max(1.0, abs(best))
    return value < best - gap if minimize else value > best + gap


@njit(cache=True)
def refactor(A, P, T, dims, kinv):
    """Rebuild ``kinv`` by Gauss-Jordan elimination; False if the kernel is singular."""
    k = dims[_K]
    dims[_UPDATES] = 0
    if k == 0:
        return True
    K = np.empty((k, k))
    inv = np.zeros((k, k))
    scale = 1.0
    for t in range(k):
        inv[t, t] = 1.0
        for p in range(k):
            K[t, p] = A[T[t], P[p]]
            scale = max(scale, abs(K[t, p]))
    for col in range(k):
        r = col
        best = abs(K[col, col])
        for rr in range(col + 1, k):
            if abs(K[rr, col]) > best:
                best = abs(K[rr, col])
                r = rr
        if not best > SINGULAR_TOL * scale:
            return False
        if r != col:
            for q in range(k):
                K[r, q], K[col, q] = K[col, q], K[r, q]
                inv[r, q], inv[col, q] = inv[col, q], inv[r, q]
        f = 1.0 / K[col, col]
        for q in range(k):
            K[col, q] *= f
            inv[col, q] *= f
        for rr in range(k):
            if rr == col:
                continue
            g = K[rr, col]
            if g != 0.0:
                for q in range(k):
                    K[rr, q] -= g * K[col, q]
                    inv[rr, q] -= g * inv[col, q]
    kinv[:k, :k] = inv
    return True


@njit(cache=True)
def repair(A, lo, hi, u, state, P, T, ppos, tpos, dims, kinv):
    """Shrink a numerically singular kernel to a well-conditioned square part.

    Complete-pivoting elimination picks independent rows and columns; the
    remaining basic structurals become nonbasic at the bound nearest ``u`` and
    the remaining tight rows are released.  The iterate may lose feasibility,
    which the composite primal then repairs.
    """
    k = dims[_K]
    K = np.empty((k, k))
    scale = 1.0
    for t in range(k):
        for p in range(k):
            K[t, p] = A[T[t], P[p]]
            scale = max(scale, abs(K[t, p]))
    rows = np.arange(k)
    cols = np.arange(k)
    rank = 0
    for step in range(k):
        bi, bj, best = step, step, 0.0
        for i in range(step, k):
            for j in range(step, k):
                if abs(K[i, j]) > best:
                    bi, bj, best = i, j, abs(K[i, j])
        if not best > REPAIR_TOL * scale:
            break
        for q in range(k):
            K[step, q], K[bi, q] = K[bi, q], K[step, q]
        for i in range(k):
            K[i, step], K[i, bj] = K[i, bj], K[i, step]
        rows[step], rows[bi] = rows[bi], rows[step]
        cols[step], cols[bj] = cols[bj], cols[step]
        for i in range(step + 1, k):
            f = K[i, step] / K[step, step]
            if f != 0.0:
                for q in range(step, k):
                    K[i, q] -= f * K[step, q]
        rank = step + 1
    newP = np.empty(rank, dtype=P.dtype)
    newT = np.empty(rank, dtype=T.dtype)
    for q in range(rank):
        newP[q] = P[cols[q]]
        newT[q] = T[rows[q]]
    for q in range(rank, k):
        j = P[cols[q]]
        ppos[j] = -1
        if np.isfinite(lo[j]) and (not np.isfinite(hi[j]) or u[j] - lo[j] <= hi[j] - u[j]):
            state[j] = LOWER
        elif np.isfinite(hi[j]):
            state[j] = UPPER
        else:
            state[j] = ZERO
        tpos[T[rows[q]]] = -1
    for q in range(rank):
        P[q] = newP[q]
        T[q] = newT[q]
        ppos[P[q]] = q
        tpos[T[q]] = q
    for q in range(rank, k):
        P[q] = -1
        T[q] = -1
    dims[_K] = rank
    return refactor(A, P, T, dims, kinv)


@njit(cache=True)
def _ill_conditioned(kinv, k, a_scale):
    """Cheap condition estimate ``max|A| * max|K^-1|`` above ``COND_LIMIT``."""
    big = 0.0
    for p in range(k):
        for t in range(k):
            big = max(big, abs(kinv[p, t]))
    return big * a_scale > COND_LIMIT


@njit(cache=True)
def primal_values(A, b, lo, hi, state, P, T, dims, kinv, u, s):
    """Fill ``u`` (structurals) and ``s`` (surpluses, zero on tight rows)."""
    n = A.shape[1]
    m = A.shape[0]
    k = dims[_K]
    for j in range(n):
        st = state[j]
        if st == LOWER:
            u[j] = lo[j]
        elif st == UPPER:
            u[j] = hi[j]
        else:
            u[j] = 0.0
    if k > 0:
        r = np.empty(k)
        for t in range(k):
            row = A[T[t]]
            acc = b[T[t]]
            for j in range(n):
                acc -= row[j] * u[j]
            r[t] = acc
        for p in range(k):
            acc = 0.0
            for t in range(k):
                acc += kinv[p, t] * r[t]
            u[P[p]] = acc
    s[:] = np.dot(A, u) - b
    for t in range(k):
        s[T[t]] = 0.0


@njit(cache=True)
def duals(A, c_struct, c_slack, use_slack, tpos, P, T, dims, kinv, y, d):
    """Row duals ``y`` and reduced costs ``d`` for basic costs ``c_struct``.

    With ``use_slack`` the loose surpluses carry costs ``c_slack`` (phase 1).
    """
    m, n = A.shape
    k = dims[_K]
    for i in range(m):
        y[i] = -c_slack[i] if (use_slack and tpos[i] < 0) else 0.0
    if k > 0:
        rhs = np.empty(k)
        for p in range(k):
            rhs[p] = c_struct[P[p]]
        if use_slack:
            for i in range(m):
                if y[i] != 0.0:
                    row = A[i]
                    for p in range(k):
                        rhs[p] -= row[P[p]] * y[i]
        for t in range(k):
            acc = 0.0
            for p in range(k):
                acc += kinv[p, t] * rhs[p]
            y[T[t]] = acc
    for j in range(n):
        d[j] = c_struct[j]
    for i in range(m):
        yi = y[i]
        if yi != 0.0:
            row = A[i]
            for j in range(n):
                d[j] -= row[j] * yi
    for p in range(k):
        d[P[p]] = 0.0


@njit(cache=True)
def pivot(A, enter_x, enter, leave_x, leave, leave_state, state, P, T, ppos, tpos, dims, kinv):
    """Exchange basis members and update ``kinv``.

    ``enter``/``leave`` are structural indices when the matching ``*_x`` flag is
    set, row indices otherwise.  Returns False if a forced rebuild finds the
    new kernel singular.
    """
    k = dims[_K]
    if leave_x:
        state[leave] = leave_state
    if enter_x:
        state[enter] = BASIC
    piv = 0.0
    if enter_x and leave_x:
        p = ppos[leave]
        w = np.zeros(k)
        for q in range(k):
            acc = 0.0
            for t in range(k):
                acc += kinv[q, t] * A[T[t], enter]
            w[q] = acc
        piv = w[p]
        if abs(piv) > SINGULAR_TOL:
            for t in range(k):
                kinv[p, t] /= piv
            for q in range(k):
                if q != p and w[q] != 0.0:
                    f = w[q]
                    for t in range(k):
                        kinv[q, t] -= f * kinv[p, t]
        P[p] = enter
        ppos[enter] = p
        ppos[leave] = -1
    elif not enter_x and not leave_x:
        q = tpos[enter]
        z = np.zeros(k)
        for t in range(k):
            acc = 0.0
            for p in range(k):
                acc += A[leave, P[p]] * kinv[p, t]
            z[t] = acc
        piv = z[q]
        if abs(piv) > SINGULAR_TOL:
            for p in range(k):
                kinv[p, q] /= piv
            for t in range(k):
                if t != q and z[t] != 0.0:
                    f = z[t]
                    for p in range(k):
                        kinv[p, t] -= f * kinv[p, q]
        T[q] = leave
        tpos[leave] = q
        tpos[enter] = -1
    elif enter_x:
        # kernel grows by row ``leave`` and column ``enter``
        w = np.zeros(k)
        z = np.zeros(k)
        for q in range(k):
            acc = 0.0
            for t in range(k):
                acc += kinv[q, t] * A[T[t], enter]
            w[q] = acc
        for t in range(k):
            acc = 0.0
            for p in range(k):
                acc += A[leave, P[p]] * kinv[p, t]
            z[t] = acc
        piv = A[leave, enter]
        for p in range(k):
            piv -= A[leave, P[p]] * w[p]
        if abs(piv) > SINGULAR_TOL:
            for p in range(k):
                for t in range(k):
                    kinv[p, t] += w[p] * z[t] / piv
                kinv[p, k] = -w[p] / piv
            for t in range(k):
                kinv[k, t] = -z[t] / piv
            kinv[k, k] = 1.0 / piv
        P[k] = enter
        T[k] = leave
        ppos[enter] = k
        tpos[leave] = k
        dims[_K] = k + 1
    else:
        # kernel loses row ``enter`` and column ``leave``
        p = ppos[leave]
        q = tpos[enter]
        piv = kinv[p, q]
        if abs(piv) > SINGULAR_TOL:
            colq = kinv[:k, q].copy()
            rowp = kinv[p, :k].copy()
            for a in range(k):
                f = colq[a] / piv
                if f != 0.0:
                    for t in range(k):
                        kinv[a, t] -= f * rowp[t]
            last = k - 1
            # move the last row / column into the vacated slots
            for t in range(k):
                kinv[p, t] = kinv[last, t]
            for a in range(k):
                kinv[a, q] = kinv[a, last]
        last = k - 1
        ppos[leave] = -1
        tpos[enter] = -1
        if p != last:
            P[p] = P[last]
            ppos[P[p]] = p
        if q != last:
            T[q] = T[last]
            tpos[T[q]] = q
        dims[_K] = last
    dims[_UPDATES] += 1
    if abs(piv) <= SINGULAR_TOL or dims[_UPDATES] >= REFACTOR_EVERY:
        return refactor(A, P, T, dims, kinv)
    return True


@njit(cache=True)
def make_dual_feasible(A, c, lo, hi, fixed, state, tpos, P, T, dims, kinv):
    """Flip boxed nonbasics onto their dual-feasible bound; False if impossible."""
    m, n = A.shape
    y = np.empty(m)
    d = np.empty(n)
    duals(A, c, y, False, tpos, P, T, dims, kinv, y, d)
    for t in range(dims[_K]):
        if y[T[t]] < -OPT_TOL:
            return False
    for j in range(n):
        st = state[j]
        if st == BASIC or fixed[j]:
            continue
        if d[j] < -OPT_TOL and st != UPPER:
            if not np.isfinite(hi[j]):
                return False
            state[j] = UPPER
        elif d[j] > OPT_TOL and st != LOWER:
            if not np.isfinite(lo[j]):
                return False
            state[j] = LOWER
    return True


@njit(cache=True)
def run_dual(A, b, c, lo, hi, fixed, state, P, T, ppos, tpos, dims, kinv, max_iter):
    m, n = A.shape
    u = np.empty(n)
    s = np.empty(m)
    y = np.empty(m)
    d = np.empty(n)
    alpha = np.empty(n)
    v = np.empty(n)
    stalled = 0
    best_obj = -np.inf
    bland = False
    a_scale = max(1.0, np.max(np.abs(A))) if A.size > 0 else 1.0
    while True:
        if dims[_ITERS] >= max_iter:
            return ITERATION_LIMIT
        k = dims[_K]
        primal_values(A, b, lo, hi, state, P, T, dims, kinv, u, s)

        # leaving variable: most infeasible basic structural or loose row
        leave, leave_x, best, key = -1, False, 0.0, 1 << 62
        delta, lstate = 1.0, LOWER
        for p in range(k):
            j = P[p]
            if u[j] < lo[j] - FEAS_TOL:
                viol, dl, ls = lo[j] - u[j], 1.0, LOWER
            elif u[j] > hi[j] + FEAS_TOL:
                viol, dl, ls = u[j] - hi[j], -1.0, UPPER
            else:
                continue
            if (bland and j < key) or (not bland and viol > best):
                leave, leave_x, best, key, delta, lstate = j, True, viol, j, dl, ls
        for i in range(m):
            if tpos[i] < 0 and s[i] < -ROW_TOL:
                if (bland and n + i < key) or (not bland and -s[i] > best):
                    leave, leave_x, best, key, delta, lstate = i, False, -s[i], n + i, 1.0, LOWER
        if leave < 0:
            return OPTIMAL

        # pivot row: sensitivity of the leaving variable to each nonbasic
        if leave_x:
            p = ppos[leave]
            for t in range(k):
                v[t] = kinv[p, t]
            for j in range(n):
                alpha[j] = 0.0
        else:
            for t in range(k):
                acc = 0.0
                for p in range(k):
                    acc += A[leave, P[p]] * kinv[p, t]
                v[t] = acc
            for j in range(n):
                alpha[j] = A[leave, j]
        for t in range(k):
            vt = v[t]
            if vt != 0.0:
                row = A[T[t]]
                for j in range(n):
                    alpha[j] -= vt * row[j]
        for p in range(k):
            alpha[P[p]] = 0.0
        duals(A, c, y, False, tpos, P, T, dims, kinv, y, d)

        scale = 1.0
        for j in range(n):
            scale = max(scale, abs(alpha[j]))
        for t in range(k):
            scale = max(scale, abs(v[t]))
        ptol = PIVOT_TOL * scale

        # ratio test over nonbasic structurals and tight-row surpluses
        theta = np.inf
        min_exact = np.inf
        for pass_no in range(2):
            pick, pick_x, pick_piv, pick_exact, pick_key = -1, False, -1.0, np.inf, 1 << 62
            for j in range(n):
                st = state[j]
                if st == BASIC or fixed[j]:
                    continue
                a = delta * alpha[j]
                if (st == LOWER or st == ZERO) and a > ptol:
                    dd = max(d[j], 0.0)
                elif (st == UPPER or st == ZERO) and a < -ptol:
                    dd = max(-d[j], 0.0)
                else:
                    continue
                piv = abs(a)
                exact = dd / piv
                if pass_no == 0:
                    theta = min(theta, (dd + HARRIS * OPT_TOL) / piv)
                    min_exact = min(min_exact, exact)
                elif bland:
                    if exact <= min_exact + 1e-12 and j < pick_key:
                        pick, pick_x, pick_exact, pick_key = j, True, exact, j
                elif exact <= theta and piv > pick_piv:
                    pick, pick_x, pick_piv, pick_exact = j, True, piv, exact
            for t in range(k):
                a = delta * v[t]
                if not a > ptol:
                    continue
                dd = max(y[T[t]], 0.0)
                exact = dd / a
                if pass_no == 0:
                    theta = min(theta, (dd + HARRIS * OPT_TOL) / a)
                    min_exact = min(min_exact, exact)
                elif bland:
                    if exact <= min_exact + 1e-12 and n + T[t] < pick_key:
                        pick, pick_x, pick_exact, pick_key = T[t], False, exact, n + T[t]
                elif exact <= theta and a > pick_piv:
                    pick, pick_x, pick_piv, pick_exact = T[t], False, a, exact
            if pass_no == 0 and not np.isfinite(theta):
                return INFEASIBLE
        dims[_ITERS] += 1
        if not pivot(A, pick_x, pick, leave_x, leave, lstate, state, P, T, ppos, tpos, dims, kinv) \
                or _ill_conditioned(kinv, dims[_K], a_scale):
            return SINGULAR
        # tolerance-sized steps can cycle as surely as zero steps, so a pivot
        # only resets the counter when the objective really moved
        obj = 0.0
        for j in range(n):
            obj += c[j] * u[j]
        if pick_exact > DEGENERATE_STEP and _progressed(obj, best_obj, False):
            stalled = 0
        else:
            stalled += 1
            if stalled > 3 * max(m, 1):
                bland = True
        best_obj = max(best_obj, obj)


@njit(cache=True)
def _small_rate_overshoots(reach, k, m, P, u, du, lo, hi, below, above, s, ds, tpos, row_scale):
    """True if a step of ``reach`` drives a skipped small-rate candidate past its tolerance."""
    for idx in range(k + m):
        if idx < k:
            j = P[idx]
            val, rate, lb, ub = u[j], du[j], lo[j], hi[j]
            bel, abv, tol, ptol = below[j], above[j], FEAS_TOL, PIVOT_TOL
        else:
            i = idx - k
            if tpos[i] >= 0:
                continue
            val, rate, lb, ub = s[i], ds[i], 0.0, np.inf
            bel, abv, tol, ptol = s[i] < -ROW_TOL, False, ROW_TOL, PIVOT_TOL * row_scale[i]
        if abs(rate) > ptol or rate == 0.0:
            continue
        if rate < 0 and not bel and np.isfinite(lb) and val + reach * rate < lb - tol:
            return True
        if rate > 0 and not abv and np.isfinite(ub) and val + reach * rate > ub + tol:
            return True
    return False


@njit(cache=True)
def run_primal(A, b, c, lo, hi, fixed, state, P, T, ppos, tpos, dims, kinv, max_iter):
    """Composite primal simplex: minimize infeasibility, then the objective."""
    m, n = A.shape
    u = np.empty(n)
    s = np.empty(m)
    y = np.empty(m)
    d = np.empty(n)
    cs = np.empty(n)
    cslack = np.empty(m)
    du = np.empty(n)
    ds = np.empty(m)
    below = np.zeros(n, dtype=np.bool_)
    above = np.zeros(n, dtype=np.bool_)
    row_scale = np.empty(m)
    for i in range(m):
        row_scale[i] = max(1.0, np.max(np.abs(A[i]))) if n > 0 else 1.0
    stalled = 0
    best_obj = np.inf
    best_infeas = np.inf
    a_scale = max(1.0, np.max(np.abs(A))) if A.size > 0 else 1.0
    bland = False
    repairs = 0
    while True:
        if dims[_ITERS] >= max_iter:
            return ITERATION_LIMIT
        k = dims[_K]
        primal_values(A, b, lo, hi, state, P, T, dims, kinv, u, s)
        phase1 = False
        for j in range(n):
            below[j] = False
            above[j] = False
            cs[j] = 0.0
        for p in range(k):
            j = P[p]
            if u[j] < lo[j] - FEAS_TOL:
                below[j] = True
                cs[j] = -1.0
                phase1 = True
            elif u[j] > hi[j] + FEAS_TOL:
                above[j] = True
                cs[j] = 1.0
                phase1 = True
        for i in range(m):
            if tpos[i] < 0 and s[i] < -ROW_TOL:
                cslack[i] = -1.0
                phase1 = True
            else:
                cslack[i] = 0.0
        if phase1:
            duals(A, cs, cslack, True, tpos, P, T, dims, kinv, y, d)
        else:
            duals(A, c, cslack, False, tpos, P, T, dims, kinv, y, d)

        # entering candidate: largest reduced-cost violation (or Bland's smallest key)
        enter, enter_x, best, key, dirn = -1, False, 0.0, 1 << 62, 1.0
        for j in range(n):
            st = state[j]
            if st == BASIC or fixed[j]:
                continue
            if (st == LOWER or st == ZERO) and d[j] < -OPT_TOL:
                score, dj = -d[j], 1.0
            elif (st == UPPER or st == ZERO) and d[j] > OPT_TOL:
                score, dj = d[j], -1.0
            else:
                continue
            if (bland and j < key) or (not bland and score > best):
                enter, enter_x, best, key, dirn = j, True, score, j, dj
        for t in range(k):
            yt = y[T[t]]
            if yt < -OPT_TOL:
                if (bland and n + T[t] < key) or (not bland and -yt > best):
                    enter, enter_x, best, key, dirn = t, False, -yt, n + T[t], 1.0
        if enter < 0:
            return INFEASIBLE if phase1 else OPTIMAL

        # direction of basic structurals and surpluses per unit step
        for j in range(n):
            du[j] = 0.0
        if enter_x:
            for p in range(k):
                acc = 0.0
                for t in range(k):
                    acc += kinv[p, t] * A[T[t], enter]
                du[P[p]] = -acc * dirn
            du[enter] = dirn
            own = hi[enter] - lo[enter]
        else:
            for p in range(k):
                du[P[p]] = kinv[p, enter]
            own = np.inf
        for i in range(m):
            row = A[i]
            acc = 0.0
            for p in range(k):
                acc += row[P[p]] * du[P[p]]
            if enter_x:
                acc += row[enter] * du[enter]
            ds[i] = acc

        # two-pass Harris ratio test over basic structurals and loose surpluses;
        # a candidate's pivot tolerance follows its own row scale, so small but
        # genuine rates on nearly tight rows still block the step
        # tiny rates are skipped as pivots, unless the chosen step would carry
        # one of them past its tolerance; then the test reruns accepting them
        for attempt in range(2):
            pivot_tol = PIVOT_TOL if attempt == 0 else TINY_PIVOT_TOL
            theta = np.inf
            min_exact = np.inf
            pick, pick_x, pick_r, step, pick_lower = -1, False, -1.0, 0.0, False
            pick_key = 1 << 62
            for pass_no in range(2):
                for idx in range(k + m):
                    if idx < k:
                        j = P[idx]
                        val, rate, lb, ub = u[j], du[j], lo[j], hi[j]
                        bel, abv, tol = below[j], above[j], FEAS_TOL
                        ptol = pivot_tol
                    else:
                        i = idx - k
                        if tpos[i] >= 0:
                            continue
                        val, rate, lb, ub = s[i], ds[i], 0.0, np.inf
                        bel, abv, tol = s[i] < -ROW_TOL, False, ROW_TOL
                        ptol = pivot_tol * row_scale[i]
                    if not abs(rate) > ptol:
                        continue
                    down = rate < 0 and not bel
                    up = rate > 0 and not abv
                    if not (down or up):
                        continue
                    hits_lower = (down and not abv) or (up and bel)
                    target = lb if hits_lower else ub
                    if not np.isfinite(target):
                        continue
                    r = abs(rate)
                    # signed, so a value already past its bound blocks at once
                    dist = max(val - target if rate < 0 else target - val, 0.0)
                    exact = dist / r
                    if pass_no == 0:
                        theta = min(theta, (dist + HARRIS * tol) / r)
                        min_exact = min(min_exact, exact)
                        continue
                    if idx < k:
                        cand, cand_x, cand_key = P[idx], True, P[idx]
                    else:
                        cand, cand_x, cand_key = idx - k, False, n + idx - k
                    if bland:
                        if exact <= min_exact + 1e-12 and cand_key < pick_key:
                            pick, pick_x, pick_key, step, pick_lower = cand, cand_x, cand_key, exact, hits_lower
                    elif exact <= theta and r > pick_r:
                        pick, pick_x, pick_r, step, pick_lower = cand, cand_x, r, exact, hits_lower
                if pass_no == 0 and (not np.isfinite(theta) or own <= min_exact):
                    break

            if attempt == 1:
                break
            reach = step if pick >= 0 else own
            if not np.isfinite(reach) or not _small_rate_overshoots(
                    reach, k, m, P, u, du, lo, hi, below, above, s, ds, tpos, row_scale):
                break

        dims[_ITERS] += 1
        if pick < 0:
            if not np.isfinite(own):
                # the sum of infeasibilities is bounded below; only numerical trouble lands here
                return INFEASIBLE if phase1 else UNBOUNDED
            step = own
            state[enter] = UPPER if state[enter] == LOWER else LOWER
        else:
            ls = LOWER if pick_lower else UPPER
            e = enter if enter_x else T[enter]
            if not pivot(A, enter_x, e, pick_x, pick, ls, state, P, T, ppos, tpos, dims, kinv) \
                    or _ill_conditioned(kinv, dims[_K], a_scale):
                repairs += 1
                if repairs > MAX_REPAIRS or not repair(A, lo, hi, u, state, P, T, ppos, tpos, dims, kinv):
                    return SINGULAR
                stalled = 0
                best_obj = np.inf
                best_infeas = np.inf
                continue
        if phase1:
            merit = 0.0
            for j in range(n):
                if below[j]:
                    merit += lo[j] - u[j]
                elif above[j]:
                    merit += u[j] - hi[j]
            for i in range(m):
                if cslack[i] < 0.0:
                    merit -= s[i]
            moved = _progressed(merit, best_infeas, True)
            best_infeas = min(best_infeas, merit)
        else:
            merit = 0.0
            for j in range(n):
                merit += c[j] * u[j]
            moved = _progressed(merit, best_obj, True)
            best_obj = min(best_obj, merit)
        # the merit is measured before the step: a stall shows up one pivot late,
        # which is irrelevant next to the 3m threshold
        if step > DEGENERATE_STEP and moved:
            stalled = 0
        else:
            stalled += 1
            if stalled > 3 * max(m, 1):
                bland = True
