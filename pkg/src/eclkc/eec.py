"""Plug-in expected EC curves, pointwise bands, and excursion thresholds."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

from .ec import ECCurve
from .hermite import ECDensityBasis, gauss_tail
from .lkc import LKCVector, hpe_single

FWER_ALPHA = 0.05
CER_ALPHA = 1.0


class NoRootError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EECModel:
    """EEC(u) = l0 Phi+(u) + sum_d L_d rho_d(u) for a given LKC vector."""

    lkc: LKCVector

    @property
    def l0(self) -> int:
        return self.lkc.l0

    @property
    def basis(self) -> ECDensityBasis:
        return ECDensityBasis(self.lkc.D)

    def evaluate(self, u):
        u = np.asarray(u, dtype=np.float64)
        rho = self.basis.densities(u)
        out = self.l0 * gauss_tail(u) + np.tensordot(self.lkc.lkc, rho, axes=1)
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def derivative(self, u):
        """EEC'(u) = -sqrt(2 pi) * sum_{d=0}^D L_d rho_{d+1}(u)."""
        u = np.asarray(u, dtype=np.float64)
        phi = np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
        out = -self.l0 * phi + np.tensordot(self.lkc.lkc, self.basis.density_derivatives(u), axes=1)
        return float(out) if out.ndim == 0 else out

    def cov(self, u, v):
        """C(u, v) = sum_{d,d'} sigma_{dd'} rho_d(u) rho_d'(v)."""
        if self.lkc.cov is None:
            raise ValueError("model has no LKC covariance; build it from hpe_sample")
        ru = self.basis.densities(np.asarray(u, dtype=np.float64))
        rv = self.basis.densities(np.asarray(v, dtype=np.float64))
        out = np.einsum("i...,ij,j...->...", ru, self.lkc.cov, rv)
        return float(out) if np.ndim(out) == 0 else out

    def band(self, u, alpha_level: float = 0.05):
        """Pointwise band EEC(u) +/- z_{1-alpha/2} sqrt(C(u,u)/N)."""
        if self.lkc.n_used < 2:
            raise ValueError("bands need an LKC covariance estimated from N >= 2 fields")
        z = stats.norm.ppf(1 - alpha_level / 2)
        centre = self.evaluate(u)
        half = z * np.sqrt(np.maximum(self.cov(u, u), 0.0) / self.lkc.n_used)
        return centre - half, centre + half

    def to_csv(self, path, grid=None, alpha_level: float = 0.05) -> None:
        grid = default_grid() if grid is None else np.asarray(grid)
        eec = self.evaluate(grid)
        if self.lkc.cov is not None and self.lkc.n_used >= 2:
            lo, hi = self.band(grid, alpha_level)
        else:
            lo = hi = np.full(grid.shape, np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "eec", "lo", "hi"])
            for row in zip(grid, eec, lo, hi):
                w.writerow([repr(float(x)) for x in row])


def default_grid(lo: float = -5.0, hi: float = 5.0, step: float = 0.01) -> np.ndarray:
    n = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(n)


def eec_evaluate(model: EECModel, u):
    return model.evaluate(u)


def eec_derivative(model: EECModel, u):
    return model.derivative(u)


def eec_cov(model: EECModel, u, v):
    return model.cov(u, v)


def eec_band(model: EECModel, u, alpha_level: float = 0.05):
    return model.band(u, alpha_level)


def smoothed_ec(curve: ECCurve, D: int) -> EECModel:
    """Smooth version of a single EC curve: its HPE plugged into the GKF."""
    return EECModel(hpe_single(curve, D))


def nonparametric_band(curves: Sequence[ECCurve], u, alpha_level: float = 0.05):
    """Mean of the raw EC curves at u +/- z * sqrt(sample variance / N)."""
    curves = list(curves)
    return band_from_values(np.array([c.evaluate(u) for c in curves], dtype=np.float64), alpha_level)


def band_from_values(vals, alpha_level: float = 0.05):
    """Pointwise normal band from an (N, ...) array of observed EC values."""
    vals = np.asarray(vals, dtype=np.float64)
    if vals.shape[0] < 2:
        raise ValueError("need N >= 2 curves for a nonparametric band")
    z = stats.norm.ppf(1 - alpha_level / 2)
    centre = vals.mean(axis=0)
    half = z * np.sqrt(vals.var(axis=0, ddof=1) / vals.shape[0])
    return centre - half, centre + half


@dataclass(frozen=True)
class ThresholdResult:
    alpha: float
    u_hat: float
    se: float
    ci95: Tuple[float, float]
    ill_conditioned: bool = False

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "u": self.u_hat, "se": self.se, "ci95": list(self.ci95)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def solve_threshold(model: EECModel, alpha: float, search=(0.0, 8.0),
                    step: float = 0.05) -> ThresholdResult:
    """Largest u in ``search`` with EEC(u) = alpha, with its delta-method SE.

    Scans the interval on a grid of ``step`` for the last sign change of
    EEC - alpha and bisects inside that bracket.
    """
    lo, hi = map(float, search)
    grid = np.append(np.arange(lo, hi, step), hi)
    g = model.evaluate(grid) - alpha
    above = np.flatnonzero(g > 0)
    if above.size == 0 or above[-1] == grid.size - 1:
        raise NoRootError(f"EEC - {alpha} has no sign change on [{lo}, {hi}]")
    k = above[-1]
    a, b = grid[k], grid[k + 1]
    while b - a > 4 * np.finfo(float).eps * max(1.0, abs(b)):
        mid = 0.5 * (a + b)
        if model.evaluate(mid) - alpha > 0:
            a = mid
        else:
            b = mid
    u = 0.5 * (a + b)
    deriv = model.derivative(u)
    ill = abs(deriv) < 1e-8
    if ill:
        warnings.warn(f"EEC derivative {deriv:.3g} at the threshold is near zero", RuntimeWarning)
    if model.lkc.cov is not None and model.lkc.n_used >= 1 and not ill:
        se = float(np.sqrt(max(model.cov(u, u), 0.0) / (model.lkc.n_used * deriv ** 2)))
    else:
        se = float("nan")
    return ThresholdResult(float(alpha), float(u), se, (u - 1.96 * se, u + 1.96 * se), bool(ill))


def threshold_variance(model: EECModel, u: float) -> float:
    """C(u,u) / (N EEC'(u)^2)."""
    return float(model.cov(u, u) / (model.lkc.n_used * model.derivative(u) ** 2))
