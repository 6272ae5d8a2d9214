"""Baseline and oracle detectors plus a single dispatch entry point."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, qr, solve_triangular

from .links import AR_L1, AR_L2, ML, LinkFunction, link_eval, objective
from .model import RealInstance, sgn

__all__ = [
    "DetectionResult",
    "DimensionTooLarge",
    "RankDeficient",
    "METHODS",
    "exhaustive_search",
    "quantized_zf",
    "least_squares",
    "bussgang_zf_init",
    "detect",
]

EXHAUSTIVE_MAX_N = 24
# smallest allowed ratio of Cholesky diagonal entries before switching to QR
GRAM_COND_LIMIT = 1e-7


class DimensionTooLarge(ValueError):
    pass


class RankDeficient(np.linalg.LinAlgError):
    pass


@dataclass
class DetectionResult:
    x_hat: np.ndarray
    objective: float
    method: str
    stats: dict = field(default_factory=dict)


def _sign_block(start: int, stop: int, n: int) -> np.ndarray:
    """Sign vectors for indices ``start..stop-1``; bit ``n-1-j`` of the index drives coordinate ``j``.

    Index order is lexicographic with -1 < +1, so the first minimizer found is
    the lexicographically smallest one.
    """
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    return 2.0 * bits - 1.0


def exhaustive_search(instance: RealInstance, link: LinkFunction, *, chunk: int = 1 << 14) -> DetectionResult:
    """Global minimizer of ``sum_i g(b_i^T x)`` over all ``2^N`` sign vectors."""
    n = instance.n
    if n > EXHAUSTIVE_MAX_N:
        raise DimensionTooLarge(f"exhaustive search limited to N <= {EXHAUSTIVE_MAX_N}, got N = {n}")
    t0 = time.perf_counter()
    b = instance.b
    best_val, best_x = math.inf, None
    total = 1 << n
    for start in range(0, total, chunk):
        xs = _sign_block(start, min(start + chunk, total), n)
        g, _ = link_eval(link, xs @ b.T)
        vals = g.sum(axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_x = float(vals[k]), xs[k].copy()
    return DetectionResult(best_x, best_val, "exhaustive",
                           {"points": total, "wall_time": time.perf_counter() - t0})


def least_squares(h: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``H^+ r`` via Cholesky on the normal equations, pivoted QR as fallback."""
    h = np.asarray(h, dtype=float)
    try:
        c = cho_factor(h.T @ h, check_finite=False)
        diag = np.abs(np.diag(c[0]))
        # squaring the condition number is harmless until it nears 1/eps
        if diag.min() > GRAM_COND_LIMIT * diag.max():
            return cho_solve(c, h.T @ r, check_finite=False)
    except LinAlgError:
        pass
    q, rr, piv = qr(h, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rr))
    if diag.size == 0 or diag[-1] <= max(h.shape) * np.finfo(float).eps * diag[0]:
        raise RankDeficient("channel matrix is rank deficient")
    z = solve_triangular(rr, q.T @ r)
    out = np.empty_like(z)
    out[piv] = z
    return out


def quantized_zf(instance: RealInstance) -> DetectionResult:
    t0 = time.perf_counter()
    x = sgn(least_squares(instance.h, instance.r))
    val = objective(instance, AR_L1, x).value
    return DetectionResult(x, val, "quantZF", {"wall_time": time.perf_counter() - t0})


def bussgang_zf_init(instance: RealInstance, seed) -> np.ndarray:
    """Regularized ZF start for the ABB solver, clipped to the box.

    ``x0 = sqrt(pi (N + s2)) / 2 * (H^T H + s2 I)^{-1} H^T (r - d)`` with
    ``d ~ N(0, (1 - 2/pi) I)`` and ``s2 = sigma^2``; N is the real dimension.
    """
    return np.clip(_bussgang_raw(instance, seed), -1.0, 1.0)


def _bussgang_raw(instance: RealInstance, seed) -> np.ndarray:
    h, r = instance.h, instance.r
    n = instance.n
    s2 = instance.sigma ** 2
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(instance.m) * math.sqrt(1.0 - 2.0 / math.pi)
    gram = h.T @ h + s2 * np.eye(n)
    c = cho_factor(gram, check_finite=False)
    return 0.5 * math.sqrt(math.pi * (n + s2)) * cho_solve(c, h.T @ (r - d), check_finite=False)


METHODS = ("gML", "AR-L1", "AR-L2", "AR-L1-ABB", "quantZF", "exhaustive", "alg1-gML")


def detect(method: str, instance: RealInstance, *, seed=0, bnb_options=None, abb_params=None) -> DetectionResult:
    """Run ``method`` on ``instance``.

    ``objective`` in the result is measured under the method's own criterion:
    the ML likelihood for gML variants and exhaustive search, the hinge or
    squared hinge for the AR methods and AR-L1 for quantized ZF.
    """
    from . import abb, bnb

    if method == "quantZF":
        return quantized_zf(instance)
    if method == "exhaustive":
        return exhaustive_search(instance, ML(instance.sigma))
    if method == "AR-L1-ABB":
        x0 = bussgang_zf_init(instance, seed)
        return abb.solve_abb(instance, abb_params or abb.AbbParams.defaults(instance), x0)
    links = {"gML": None, "alg1-gML": None, "AR-L1": AR_L1, "AR-L2": AR_L2}
    if method not in links:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    link = links[method] or ML(instance.sigma)
    opts = bnb_options or bnb.SolverOptions()
    if method == "alg1-gML":
        res = bnb.solve_alg1(instance, link, opts)
    else:
        res = bnb.solve_global(instance, link, opts)
    return DetectionResult(res.x_opt, res.objective, method, res.stats_dict())
