"""Scalar convex link functions and the objectives built from them.

Every formulation in the package minimizes ``sum_i g(b_i^T x)`` for a convex,
non-increasing scalar ``g``:

* ``ML``    : ``g(t) = -log Phi(t / sigma)`` (probit negative log-likelihood)
* ``AR_L1`` : ``g(t) = max(-t, 0)``
* ``AR_L2`` : ``g(t) = max(-t, 0)**2``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erfcx

__all__ = [
    "LinkKind",
    "LinkFunction",
    "ObjectiveEval",
    "ML",
    "AR_L1",
    "AR_L2",
    "log_phi",
    "mills_ratio",
    "link_eval",
    "objective",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LOG_HALF = math.log(0.5)


def log_phi(z):
    """``log Phi(z)`` for the standard normal CDF, stable in both tails.

    For ``z < 0`` the scaled complementary error function carries the
    Gaussian factor analytically, so nothing underflows; for ``z >= 0`` the
    value is ``log1p(-Phi(-z))`` which keeps the tiny negative right tail.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    neg = z < 0
    zn = z[neg]
    out[neg] = _LOG_HALF + np.log(erfcx(-zn / _SQRT2)) - 0.5 * zn * zn
    zp = z[~neg]
    # Phi(-z) through erfcx so the far right tail reaches the subnormal range
    out[~neg] = np.log1p(-np.exp(_LOG_HALF + np.log(erfcx(zp / _SQRT2)) - 0.5 * zp * zp))
    return out[()] if out.ndim == 0 else out


def mills_ratio(z):
    """Inverse Mills ratio ``phi(z) / Phi(z)``; behaves like ``-z`` as ``z -> -inf``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    neg = z < 0
    out[neg] = _SQRT_2_OVER_PI / erfcx(-z[neg] / _SQRT2)
    zp = z[~neg]
    out[~neg] = _INV_SQRT_2PI * np.exp(-0.5 * zp * zp) / (1.0 - 0.5 * erfcx(zp / _SQRT2) * np.exp(-0.5 * zp * zp))
    return out[()] if out.ndim == 0 else out


class LinkKind:
    ML = "ML"
    AR_L1 = "AR_L1"
    AR_L2 = "AR_L2"


@dataclass(frozen=True)
class LinkFunction:
    kind: str
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in (LinkKind.ML, LinkKind.AR_L1, LinkKind.AR_L2):
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind == LinkKind.ML and not (self.sigma is not None and self.sigma > 0):
            raise ValueError("ML link needs sigma > 0")

    @property
    def piecewise_linear(self) -> bool:
        return self.kind == LinkKind.AR_L1

    def value(self, t):
        return link_eval(self, t)[0]

    def __str__(self):
        return self.kind if self.sigma is None else f"{self.kind}(sigma={self.sigma:g})"


def ML(sigma: float) -> LinkFunction:
    return LinkFunction(LinkKind.ML, float(sigma))


AR_L1 = LinkFunction(LinkKind.AR_L1)
AR_L2 = LinkFunction(LinkKind.AR_L2)


def link_eval(link: LinkFunction, t):
    """Return ``(g(t), g'(t))``, vectorized over ``t``.

    At the kink of the hinge the flat piece is used, ``g'(0) = 0``.
    """
    t = np.asarray(t, dtype=float)
    if link.kind == LinkKind.ML:
        s = link.sigma
        u = t / s
        return -log_phi(u), -mills_ratio(u) / s
    hinge = np.maximum(-t, 0.0)
    if link.kind == LinkKind.AR_L1:
        return hinge, np.where(t < 0, -1.0, 0.0)
    return hinge * hinge, -2.0 * hinge


class ObjectiveEval(NamedTuple):
    value: float
    gradient: np.ndarray


def objective(instance, link: LinkFunction, x) -> ObjectiveEval:
    """``sum_i g(b_i^T x)`` and its gradient ``sum_i g'(b_i^T x) b_i``."""
    b = instance.b
    t = b @ np.asarray(x, dtype=float)
    g, gp = link_eval(link, t)
    return ObjectiveEval(float(np.sum(g)), gp @ b)
