"""Fast approximate AR-L1 detection by smoothed, penalized projected gradient.

The hinge objective ``sum_i max(-b_i^T x, 0)`` is smoothed with a quadratic
regularizer on its two-piece max, the binary constraint is relaxed to the
box ``[-1, 1]^N`` and a concave penalty ``-lam ||x||^2`` pushes iterates to
the vertices.  Each penalty stage is solved by projected gradient with
alternating Barzilai-Borwein steps and a nonmonotone (GLL) line search; the
penalty grows geometrically between stages.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .detectors import DetectionResult
from .links import AR_L1, objective
from .model import RealInstance, sgn

__all__ = [
    "AbbParams",
    "AbbState",
    "LineSearchResult",
    "smoothed_value_and_grad",
    "abb_step_size",
    "gll_line_search",
    "lipschitz_bound",
    "solve_abb",
]

DENOM_TOL = 1e-14


@dataclass(frozen=True)
class AbbParams:
    lambda_init: float
    lambda_max: float = 100.0
    growth_c: float = 5.0
    rho: float = 0.3
    tau: float = 0.1
    gll_memory_kappa: int = 4
    eps_stop: float = 1e-6
    max_inner_iters: int = 500
    backtrack_factor: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        for name in ("lambda_init", "lambda_max", "growth_c", "rho", "eps_stop"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.gll_memory_kappa < 1 or self.max_inner_iters < 1 or self.max_backtracks < 0:
            raise ValueError("kappa and max_inner_iters must be >= 1, max_backtracks >= 0")

    @classmethod
    def defaults(cls, instance: RealInstance, **overrides) -> "AbbParams":
        """Standard settings for ``instance``; keyword overrides win."""
        n = instance.n
        lambda_max = overrides.get("lambda_max", 100.0)
        growth_c = overrides.get("growth_c", 5.0)
        base = dict(
            # capped so that at least one stage below lambda_max always runs
            lambda_init=min(0.1 * n, lambda_max / growth_c),
            lambda_max=lambda_max,
            growth_c=growth_c,
            rho=0.3 + math.log1p(instance.sigma),
            eps_stop=1e-6 * math.sqrt(n),
        )
        base.update(overrides)
        return cls(**base)


@dataclass
class AbbState:
    x_prev: np.ndarray
    x_curr: np.ndarray
    grad_prev: np.ndarray
    grad_curr: np.ndarray
    f_history: deque = field(default_factory=deque)
    lam: float = 0.0
    iter: int = 0


def _smoothed_terms(t, rho):
    theta = np.clip((rho - t) / (2.0 * rho), 0.0, 1.0)
    # equals -t - rho/2 for t <= -rho and -rho/2 for t >= rho
    v = -theta * t - 0.5 * rho * (theta * theta + (1.0 - theta) ** 2)
    return v, theta


def smoothed_value_and_grad(instance: RealInstance, rho: float, lam: float, x) -> tuple[float, np.ndarray]:
    """``F(x) = sum_i v_i(b_i^T x) - lam ||x||^2`` and its gradient."""
    b = instance.b
    x = np.asarray(x, dtype=float)
    v, theta = _smoothed_terms(b @ x, rho)
    f = float(np.sum(v)) - lam * float(x @ x)
    grad = -(theta @ b) - 2.0 * lam * x
    return f, grad


def abb_step_size(s, beta, iter: int, fallback: float = 1.0) -> float:
    """Alternating Barzilai-Borwein step; ``fallback`` when a denominator vanishes."""
    s = np.asarray(s, dtype=float)
    beta = np.asarray(beta, dtype=float)
    sb = abs(float(s @ beta))
    if iter % 2 == 0:
        num, den = float(s @ s), sb
    else:
        num, den = sb, float(beta @ beta)
    if den < DENOM_TOL:
        return fallback
    return num / den


def _fallback_step(grad) -> float:
    gmax = float(np.max(np.abs(grad))) if len(grad) else 0.0
    return 1.0 if gmax <= 1.0 else 1.0 / gmax


class LineSearchResult(NamedTuple):
    eta: float
    x_next: np.ndarray
    f_next: float
    grad_next: np.ndarray
    backtracks: int
    exhausted: bool


def gll_line_search(instance: RealInstance, rho: float, lam: float, x, d, grad, f_history, *,
                    tau: float = 0.1, backtrack_factor: float = 0.5,
                    max_backtracks: int = 40) -> LineSearchResult:
    """Largest ``eta`` in ``{1, b, b^2, ...}`` with ``F(x + eta d) <= f_r + tau eta <grad, d>``.

    ``f_r`` is the maximum over ``f_history``.  After ``max_backtracks``
    reductions the smallest trial step is accepted and ``exhausted`` is set.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    f_ref = max(f_history)
    slope = float(np.asarray(grad) @ d)
    eta = 1.0
    for k in range(max_backtracks + 1):
        x_try = x + eta * d
        f_try, g_try = smoothed_value_and_grad(instance, rho, lam, x_try)
        if f_try <= f_ref + tau * eta * slope:
            return LineSearchResult(eta, x_try, f_try, g_try, k, False)
        if k < max_backtracks:
            eta *= backtrack_factor
    return LineSearchResult(eta, x_try, f_try, g_try, max_backtracks, True)


def lipschitz_bound(instance: RealInstance, rho: float) -> float:
    """Gradient Lipschitz constant of the smoothed hinge sum, ``sum_i ||b_i||^2 / rho``."""
    return float(np.sum(instance.b * instance.b)) / rho


def solve_abb(instance: RealInstance, params: AbbParams, x0) -> DetectionResult:
    """Penalty-homotopy ABB; returns ``sgn`` of the last iterate and its hinge objective."""
    t0 = time.perf_counter()
    p = params
    x = np.clip(np.asarray(x0, dtype=float), -1.0, 1.0)
    lam = p.lambda_init
    f, g = smoothed_value_and_grad(instance, p.rho, lam, x)
    state = AbbState(x.copy(), x, g.copy(), g, deque([f], maxlen=p.gll_memory_kappa), lam, 0)
    first_step = 1.0 / lipschitz_bound(instance, p.rho)
    stages = exhausted = stage_limits = 0

    while True:
        stages += 1
        if stages > 1:
            # F changes with lam: re-evaluate the pair and restart the history
            state.lam = lam
            f, state.grad_curr = smoothed_value_and_grad(instance, p.rho, lam, state.x_curr)
            _, state.grad_prev = smoothed_value_and_grad(instance, p.rho, lam, state.x_prev)
            state.f_history = deque([f], maxlen=p.gll_memory_kappa)
        for inner in range(p.max_inner_iters):
            x, g = state.x_curr, state.grad_curr
            if state.iter == 0:
                alpha = first_step
            else:
                alpha = abb_step_size(x - state.x_prev, g - state.grad_prev, state.iter,
                                      fallback=_fallback_step(g))
            state.iter += 1
            d = np.clip(x - alpha * g, -1.0, 1.0) - x
            slope = float(g @ d)
            assert slope <= 1e-12 * max(1.0, float(np.abs(g) @ np.abs(d))), "projected-gradient direction is not descent"
            ls = gll_line_search(instance, p.rho, lam, x, d, g, state.f_history,
                                 tau=p.tau, backtrack_factor=p.backtrack_factor,
                                 max_backtracks=p.max_backtracks)
            exhausted += ls.exhausted
            x_next = np.clip(ls.x_next, -1.0, 1.0)
            state.x_prev, state.grad_prev = x, g
            state.x_curr, state.grad_curr = x_next, ls.grad_next
            state.f_history.append(ls.f_next)
            if float(np.linalg.norm(x_next - x)) <= p.eps_stop:
                break
        else:
            stage_limits += 1
        lam *= p.growth_c
        if lam >= p.lambda_max:
            break

    x_final = state.x_curr
    x_hat = sgn(x_final)
    val = objective(instance, AR_L1, x_hat).value
    stats = {
        "wall_time": time.perf_counter() - t0,
        "iterations": state.iter,
        "stages": stages,
        "lambda_final": state.lam,
        "backtrack_exhausted": exhausted,
        "stage_iteration_limits": stage_limits,
        "extreme_fraction": float(np.mean(np.abs(x_final) >= 0.99)),
        "x_final": x_final.copy(),
    }
    return DetectionResult(x_hat, val, "AR-L1-ABB", stats)
