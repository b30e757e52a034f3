"""Probabilists' Hermite polynomials, Gaussian EC densities and the Hermite projector."""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, special

QUAD_LIMIT = 9.0


def hermite(d: int, u):
    """H_d(u) by the three-term recurrence H_{k+1} = u H_k - k H_{k-1}."""
    if d < 0:
        raise ValueError("Hermite degree must be non-negative")
    u = np.asarray(u, dtype=np.float64)
    h_prev, h = np.ones_like(u), u.copy()
    if d == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for k in range(1, d):
        h_prev, h = h, u * h - k * h_prev
    return h if h.ndim else float(h)


def hermite_table(max_degree: int, u) -> np.ndarray:
    """Array of H_0(u), ..., H_max_degree(u) stacked along a new leading axis."""
    u = np.asarray(u, dtype=np.float64)
    out = np.empty((max_degree + 1,) + u.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = u
    for k in range(1, max_degree):
        out[k + 1] = u * out[k] - k * out[k - 1]
    return out


def ec_density(d: int, u):
    """rho_d(u) = (2 pi)^(-(d+1)/2) H_{d-1}(u) exp(-u^2/2) for d >= 1."""
    if d < 1:
        raise ValueError("EC densities are indexed from d = 1")
    u = np.asarray(u, dtype=np.float64)
    out = (2 * np.pi) ** (-(d + 1) / 2) * hermite(d - 1, u) * np.exp(-0.5 * u * u)
    return out if np.ndim(out) else float(out)


def gauss_tail(u):
    """P(N(0,1) > u)."""
    out = 0.5 * special.erfc(np.asarray(u, dtype=np.float64) / math.sqrt(2.0))
    return out if np.ndim(out) else float(out)


def projector_scale(d: int) -> float:
    """(2 pi)^(d/2) / (d-1)!, the normalisation of the d-th Hermite projector."""
    return (2 * np.pi) ** (d / 2) / math.factorial(d - 1)


def _quad(fun, a, b, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fun, a, b, epsabs=1e-12, epsrel=1e-12,
                                      limit=500, points=points)
        except integrate.IntegrationWarning as exc:
            raise ArithmeticError(f"quadrature did not converge: {exc}") from None
    if not np.isfinite(val):
        raise ArithmeticError("quadrature diverged")
    return val


def _pinning_integral(d: int) -> float:
    """Integral of H_{d-1}(u) * (1{u < 0} - Phi+(u)) over the real line."""
    lo = _quad(lambda u: hermite(d - 1, u) * (1.0 - gauss_tail(u)), -np.inf, 0.0)
    hi = _quad(lambda u: -hermite(d - 1, u) * gauss_tail(u), 0.0, np.inf)
    return lo + hi


def _step_integral(d: int, curve) -> float:
    """Integral of H_{d-1}(u) * (chi(u) - l0 * 1{u < 0}) for a step curve, exact."""
    c = np.asarray(curve.crit_values, dtype=np.float64)
    levels = curve.l0 + np.concatenate([[0.0], np.cumsum(curve.deltas)])
    # chi - l0*1{u<0} on the pieces between sorted breakpoints {c, 0}
    knots = np.union1d(c, [0.0])
    chi_left = levels[np.searchsorted(c, knots, side="left")]  # value just left of each knot
    pin_left = np.where(knots <= 0.0, curve.l0, 0.0)
    g = chi_left - pin_left  # value on (knots[i-1], knots[i]]
    # g vanishes left of the first knot and right of the last
    anti = hermite(d, knots) / d
    return float(np.sum(g[1:] * (anti[1:] - anti[:-1])))


def weighted_inner(g, d: int, l0: float = None) -> float:
    """d-th Hermite projection of a pinned curve.

    Returns (2 pi)^(d/2)/(d-1)! * integral of H_{d-1}(u) g(u) du. ``g`` is either
    a callable already pinned to decay at both ends (integrated by adaptive
    quadrature on [-9, 9]), or a step curve with ``l0``, ``crit_values`` and
    ``deltas``, in which case the pinned curve chi(u) - l0 Phi+(u) is
    projected: the step part exactly through the antiderivative H_d/d and the
    smooth part by quadrature.
    """
    if d < 1:
        raise ValueError("projection order must be >= 1")
    if hasattr(g, "crit_values"):
        integral = _step_integral(d, g) + g.l0 * _pinning_integral(d)
    else:
        integral = _quad(lambda u: hermite(d - 1, u) * float(g(u)), -QUAD_LIMIT, QUAD_LIMIT,
                         points=[0.0])
    return projector_scale(d) * integral


class ECDensityBasis:
    """Gaussian EC densities rho_1..rho_D and their derivatives."""

    def __init__(self, max_order: int):
        if max_order < 1:
            raise ValueError("max_order must be >= 1")
        self.max_order = int(max_order)

    def densities(self, u) -> np.ndarray:
        """Array (D, *u.shape) of rho_1(u)..rho_D(u)."""
        u = np.asarray(u, dtype=np.float64)
        h = hermite_table(self.max_order, u)
        e = np.exp(-0.5 * u * u)
        scale = (2 * np.pi) ** (-(np.arange(1, self.max_order + 1) + 1) / 2)
        return scale.reshape((-1,) + (1,) * u.ndim) * h[:-1] * e

    def density_derivatives(self, u) -> np.ndarray:
        """Array (D, *u.shape) of rho_d'(u) = -sqrt(2 pi) rho_{d+1}(u)."""
        u = np.asarray(u, dtype=np.float64)
        h = hermite_table(self.max_order, u)
        e = np.exp(-0.5 * u * u)
        scale = (2 * np.pi) ** (-(np.arange(1, self.max_order + 1) + 1) / 2)
        return -scale.reshape((-1,) + (1,) * u.ndim) * h[1:] * e
