"""Test fields with known Lipschitz-Killing curvatures.

``simulate_isotropic`` smooths lattice white noise on [1, L]^2 with a Gaussian
kernel of bandwidth nu and rescales each location to unit variance; its limit
has covariance exp(-beta |t|^2), beta = 1/(4 nu^2). ``simulate_scale_space``
produces the 2D scale-space field f(t, gamma) of 1D white noise smoothed at
bandwidth gamma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .grid import FieldSample
from .lkc import LKCVector

TRUNCATE = 6.0
NOISES = ("gaussian", "chisq3")


@dataclass(frozen=True)
class IsotropicSpec:
    L: int = 50
    nu: float = 5.0
    noise: str = "gaussian"

    def __post_init__(self):
        if self.L < 1 or self.nu <= 0:
            raise ValueError("need L >= 1 and nu > 0")
        if self.noise not in NOISES:
            raise ValueError(f"noise must be one of {NOISES}")


@dataclass(frozen=True)
class ScaleSpaceSpec:
    L: float = 50.0
    gamma1: float = 4.0
    gamma2: float = 15.0
    n_t: int = 128
    n_gamma: int = 32
    noise: str = "gaussian"

    def __post_init__(self):
        if not 0 < self.gamma1 <= self.gamma2:
            raise ValueError("need 0 < gamma1 <= gamma2")
        if self.noise not in NOISES:
            raise ValueError(f"noise must be one of {NOISES}")

    @property
    def t(self) -> np.ndarray:
        return np.linspace(1.0, self.L, self.n_t)

    @property
    def gamma(self) -> np.ndarray:
        return np.geomspace(self.gamma1, self.gamma2, self.n_gamma)


def _noise(rng: np.random.Generator, kind: str, shape) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal(shape)
    return (rng.chisquare(3, size=shape) - 3.0) / math.sqrt(6.0)


def _kernel_matrix(L: int, nu: float, pad: int) -> np.ndarray:
    d = np.arange(L)[:, None] - np.arange(-pad, L + pad)[None, :]
    K = np.exp(-d.astype(float) ** 2 / (2 * nu * nu))
    K[np.abs(d) > TRUNCATE * nu] = 0.0
    return K


def simulate_isotropic(spec: IsotropicSpec, n: int, rng=None, method: str = "direct",
                       extend_noise: bool = True) -> FieldSample:
    """n fields on the [1, L]^2 lattice, each with unit variance at every point.

    f(s) = sum_{k,l} K(s-(k,l)) W_kl / sqrt(sum_{k,l} K(s-(k,l))^2). The noise
    lattice extends 6 nu beyond the domain so the field is stationary up to
    the boundary; ``extend_noise=False`` restricts it to [1, L]^2. The kernel
    is separable, so ``direct`` applies it as K W K^T; ``fft`` convolves with
    the 2D kernel instead.
    """
    rng = np.random.default_rng(rng)
    L = spec.L
    r = int(math.floor(TRUNCATE * spec.nu))
    pad = r if extend_noise else 0
    W = _noise(rng, spec.noise, (n, L + 2 * pad, L + 2 * pad))
    K = _kernel_matrix(L, spec.nu, pad)
    norm = np.sqrt(np.outer((K * K).sum(axis=1), (K * K).sum(axis=1)))
    if method == "direct":
        f = K @ W @ K.T
    elif method == "fft":
        x = np.arange(-r, r + 1, dtype=float)
        k1 = np.exp(-x * x / (2 * spec.nu ** 2))
        full = signal.fftconvolve(W, np.outer(k1, k1)[None], mode="full", axes=(1, 2))
        lo = pad + r
        f = full[:, lo:lo + L, lo:lo + L]
    else:
        raise ValueError(f"unknown method {method!r}")
    return FieldSample(f / norm)


def true_lkc_isotropic(spec: IsotropicSpec) -> LKCVector:
    """L1 = 2 sqrt(2 beta) (L-1), L2 = 2 beta (L-1)^2 with beta = 1/(4 nu^2)."""
    beta = 1.0 / (4.0 * spec.nu ** 2)
    side = spec.L - 1
    return LKCVector(1, [2 * math.sqrt(2 * beta) * side, 2 * beta * side ** 2], estimator="true")


def simulate_scale_space(spec: ScaleSpaceSpec, n: int, rng=None) -> FieldSample:
    """n scale-space fields on the (n_t, n_gamma) grid over [1, L] x [gamma1, gamma2].

    White noise lives on a grid with the t spacing, extended by 6 gamma2 on
    both sides; every (t, gamma) kernel row is scaled to unit l2 norm.
    """
    rng = np.random.default_rng(rng)
    t = spec.t
    h = t[1] - t[0] if t.size > 1 else 1.0
    pad = int(math.ceil(TRUNCATE * spec.gamma2 / h))
    s = t[0] + h * np.arange(-pad, t.size + pad)
    W = _noise(rng, spec.noise, (n, s.size))
    out = np.empty((n, t.size, spec.n_gamma))
    diff = t[:, None] - s[None, :]
    for j, g in enumerate(spec.gamma):
        K = np.exp(-diff ** 2 / (2 * g * g))
        K /= np.sqrt((K * K).sum(axis=1, keepdims=True))
        out[:, :, j] = W @ K.T
    return FieldSample(out)


def true_lkc_scale_space(spec: ScaleSpaceSpec) -> LKCVector:
    g1, g2, side = spec.gamma1, spec.gamma2, spec.L - 1
    l1 = side / (2 * math.sqrt(2)) * (1 / g1 + 1 / g2) + math.log(g2 / g1) / math.sqrt(2)
    l2 = side / 2 * (1 / g1 - 1 / g2)
    return LKCVector(1, [l1, l2], estimator="true")
