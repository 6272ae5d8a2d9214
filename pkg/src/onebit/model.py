"""Synthetic one-bit MIMO instances and the complex-to-real stacking.

The complex uplink model is ``r~ = Q(H~ x~ + v~)`` with QPSK symbols and a
one-bit quantizer acting separately on the real and imaginary parts.  Every
solver in this package works on the stacked real model ``r = sgn(H x + v)``
with ``B = Diag(r) H``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ComplexInstance",
    "RealInstance",
    "SnrSpec",
    "sgn",
    "quantize",
    "complex_to_real",
    "noise_sigma_from_snr",
    "make_instance",
    "generate_instance",
    "instance_to_json",
    "instance_from_json",
    "save_instance",
    "load_instance",
]


def sgn(a):
    """Element-wise sign with the convention ``sgn(0) = +1``."""
    return np.where(np.asarray(a) >= 0, 1.0, -1.0)


def quantize(y: np.ndarray) -> np.ndarray:
    """One-bit quantizer on real and imaginary parts."""
    y = np.asarray(y, dtype=complex)
    return sgn(y.real) + 1j * sgn(y.imag)


@dataclass(frozen=True)
class ComplexInstance:
    h_tilde: np.ndarray
    x_tilde: np.ndarray
    sigma_tilde_sq: float
    r_tilde: np.ndarray
    # noise actually drawn; kept so the sign-consistency invariant can be checked
    v_tilde: np.ndarray | None = None
    snr_db: float | None = None
    seed: int | None = None

    @property
    def m_tilde(self) -> int:
        return self.h_tilde.shape[0]

    @property
    def n_tilde(self) -> int:
        return self.h_tilde.shape[1]


@dataclass(frozen=True)
class RealInstance:
    """Stacked real detection problem.

    Attributes
    ----------
    h : (M, N) ndarray
        Stacked channel ``[[Re, -Im], [Im, Re]]``.
    r : (M,) ndarray
        One-bit observations in ``{-1, +1}``.
    sigma : float
        Per-dimension noise standard deviation.
    x_true : (N,) ndarray or None
        Transmitted sign vector when known.
    """

    h: np.ndarray
    r: np.ndarray
    sigma: float
    x_true: np.ndarray | None = None
    v: np.ndarray | None = None
    source: ComplexInstance | None = field(default=None, repr=False, compare=False)
    b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = np.ascontiguousarray(self.h, dtype=float)
        r = np.asarray(self.r, dtype=float)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "b", r[:, None] * h)
        for arr in (h, r, self.b):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def n(self) -> int:
        return self.h.shape[1]


@dataclass(frozen=True)
class SnrSpec:
    snr_db: float
    n_tilde: int


def _stack_vec(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag])


def _stack_mat(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def complex_to_real(c: ComplexInstance) -> RealInstance:
    x = _stack_vec(c.x_tilde)
    v = None if c.v_tilde is None else _stack_vec(c.v_tilde)
    return RealInstance(
        h=_stack_mat(c.h_tilde),
        r=_stack_vec(c.r_tilde),
        sigma=math.sqrt(c.sigma_tilde_sq / 2.0),
        x_true=x,
        v=v,
        source=c,
    )


def noise_sigma_from_snr(s: SnrSpec) -> float:
    """Complex noise variance for a target SNR.

    ``E||H~ x~||^2 = 2 M~ N~`` for unit-variance channel entries and QPSK
    symbols of power 2, while ``E||v~||^2 = M~ sigma~^2``, so the SNR ratio
    gives ``sigma~^2 = 2 N~ / snr``.  ``snr_db = inf`` returns 0.
    """
    snr_lin = 10.0 ** (s.snr_db / 10.0)
    return 2.0 * s.n_tilde / snr_lin


def make_instance(h_tilde, x_tilde, v_tilde, sigma_tilde_sq: float, *,
                  snr_db=None, seed=None) -> ComplexInstance:
    """Quantize ``H~ x~ + v~`` and wrap the pieces as a :class:`ComplexInstance`."""
    h_tilde = np.asarray(h_tilde, dtype=complex)
    x_tilde = np.asarray(x_tilde, dtype=complex)
    v_tilde = np.zeros(h_tilde.shape[0], dtype=complex) if v_tilde is None else np.asarray(v_tilde, dtype=complex)
    r_tilde = quantize(h_tilde @ x_tilde + v_tilde)
    return ComplexInstance(h_tilde, x_tilde, float(sigma_tilde_sq), r_tilde,
                           v_tilde=v_tilde, snr_db=snr_db, seed=seed)


def generate_instance(m_tilde: int, n_tilde: int, snr_db: float, seed: int) -> RealInstance:
    """Draw one instance of the probit model, deterministically from ``seed``.

    Draw order is fixed (channel, symbols, noise) so an instance is a pure
    function of its arguments.  NumPy's PCG64 generator supplies the bits and
    its ziggurat sampler the Gaussians.
    """
    rng = np.random.default_rng(seed)
    sigma_tilde_sq = noise_sigma_from_snr(SnrSpec(snr_db, n_tilde))
    g = rng.standard_normal((2, m_tilde, n_tilde))
    h_tilde = (g[0] + 1j * g[1]) / math.sqrt(2.0)
    bits = rng.integers(0, 2, size=(2, n_tilde))
    x_tilde = (2.0 * bits[0] - 1.0) + 1j * (2.0 * bits[1] - 1.0)
    e = rng.standard_normal((2, m_tilde))
    v_tilde = math.sqrt(sigma_tilde_sq / 2.0) * (e[0] + 1j * e[1])
    c = make_instance(h_tilde, x_tilde, v_tilde, sigma_tilde_sq, snr_db=snr_db, seed=seed)
    return complex_to_real(c)


# JSON instance files

def instance_to_json(inst: RealInstance) -> dict:
    c = inst.source
    if c is None:
        raise ValueError("instance has no complex source; only generated instances can be serialized")
    return {
        "m_tilde": c.m_tilde,
        "n_tilde": c.n_tilde,
        "snr_db": c.snr_db,
        "seed": c.seed,
        "H_re": c.h_tilde.real.tolist(),
        "H_im": c.h_tilde.imag.tolist(),
        "x_re": c.x_tilde.real.tolist(),
        "x_im": c.x_tilde.imag.tolist(),
        "r_re": c.r_tilde.real.tolist(),
        "r_im": c.r_tilde.imag.tolist(),
        "sigma_tilde_sq": c.sigma_tilde_sq,
    }


def instance_from_json(d: dict) -> RealInstance:
    required = ("H_re", "H_im", "r_re", "r_im", "sigma_tilde_sq")
    missing = [k for k in required if k not in d]
    if missing:
        raise ValueError(f"instance file missing fields: {', '.join(missing)}")
    h = np.asarray(d["H_re"], dtype=float) + 1j * np.asarray(d["H_im"], dtype=float)
    h = h.reshape(int(d.get("m_tilde", h.shape[0])), -1)
    r = np.asarray(d["r_re"], dtype=float) + 1j * np.asarray(d["r_im"], dtype=float)
    if "x_re" in d and "x_im" in d:
        x = np.asarray(d["x_re"], dtype=float) + 1j * np.asarray(d["x_im"], dtype=float)
    else:
        x = None
    c = ComplexInstance(h, x, float(d["sigma_tilde_sq"]), r,
                        snr_db=d.get("snr_db"), seed=d.get("seed"))
    inst = RealInstance(h=_stack_mat(h), r=_stack_vec(r),
                        sigma=math.sqrt(c.sigma_tilde_sq / 2.0),
                        x_true=None if x is None else _stack_vec(x), source=c)
    return inst


def save_instance(inst: RealInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_json(inst)))


def load_instance(path) -> RealInstance:
    return instance_from_json(json.loads(Path(path).read_text()))
