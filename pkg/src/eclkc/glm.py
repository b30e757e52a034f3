"""Pointwise general linear model: coefficients, z-score fields, standardized residuals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, ndimage

from .grid import FieldSample, FieldValidationError, GridField
from .lkc import DEGENERATE_RTOL, normalize_residuals


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    contrast: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        n, p = X.shape
        if n <= p:
            raise ValueError(f"design needs more rows than columns, got {n}x{p}")
        if np.linalg.matrix_rank(X) < p:
            raise np.linalg.LinAlgError("design matrix is rank deficient")
        object.__setattr__(self, "X", X)
        if self.contrast is not None:
            c = np.asarray(self.contrast, dtype=np.float64).ravel()
            if c.size != p:
                raise ValueError(f"contrast has {c.size} entries, design has {p} columns")
            object.__setattr__(self, "contrast", c)

    @property
    def shape(self):
        return self.X.shape

    @property
    def is_intercept_only(self) -> bool:
        return self.X.shape[1] == 1 and np.all(self.X == self.X[0, 0]) and self.X[0, 0] != 0

    @property
    def has_intercept(self) -> bool:
        """Whether the constant vector lies in the column space."""
        ones = np.ones(self.X.shape[0])
        coef, *_ = np.linalg.lstsq(self.X, ones, rcond=None)
        return bool(np.allclose(self.X @ coef, ones, atol=1e-10))

    @classmethod
    def from_csv(cls, path, contrast=None) -> "DesignMatrix":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2), contrast)


@dataclass(frozen=True)
class GLMFit:
    beta: np.ndarray          # (P, *grid)
    residuals: FieldSample    # N residual fields
    design: DesignMatrix
    scale: np.ndarray = None  # pointwise norm of the data, for degeneracy checks


def fit_pointwise(sample: FieldSample, design: DesignMatrix, smooth_sd: float = None) -> GLMFit:
    """Least-squares fit of Y(s) = X beta(s) + eps(s) at every location via QR.

    ``smooth_sd`` optionally smooths the residual fields with a separable
    Gaussian filter of that standard deviation (in grid units).
    """
    N, P = design.shape
    if len(sample) != N:
        raise ValueError(f"sample has {len(sample)} fields, design has {N} rows")
    Y = np.where(sample.domain, sample.data, 0.0).reshape(N, -1)
    if design.is_intercept_only:
        # closed form of the same projection; keeps residuals identical to plain centring
        mean = Y.mean(axis=0)
        beta = (mean / design.X[0, 0])[None]
        e = Y - mean
    else:
        Q, R = np.linalg.qr(design.X)
        beta = linalg.solve_triangular(R, Q.T @ Y)
        e = Y - design.X @ beta
    e = e.reshape(sample.data.shape)
    if smooth_sd:
        e = np.stack([ndimage.gaussian_filter(r, smooth_sd, mode="nearest") for r in e])
    if sample.mask is not None:
        e = np.where(sample.mask, e, 0.0)
    scale = np.sqrt(np.sum(Y * Y, axis=0)).reshape(sample.shape)
    return GLMFit(beta.reshape((P,) + sample.shape), FieldSample(e, sample.mask), design, scale)


def zscore_field(fit: GLMFit, contrast=None) -> GridField:
    """z(s) = c'beta(s) / sqrt(sigma^2(s) c'(X'X)^{-1} c), sigma^2 = |e(s)|^2 / (N - P)."""
    design = fit.design
    c = design.contrast if contrast is None else np.asarray(contrast, dtype=np.float64).ravel()
    if c is None:
        raise ValueError("a contrast vector is required")
    N, P = design.shape
    _, R = np.linalg.qr(design.X)
    v = linalg.solve_triangular(R, c, trans="T")  # c'(X'X)^{-1}c = |R^{-T} c|^2
    eta = np.tensordot(c, fit.beta, axes=1)
    rss = np.sum(fit.residuals.data ** 2, axis=0)
    dom = fit.residuals.domain
    tol = 0.0 if fit.scale is None else (DEGENERATE_RTOL * fit.scale) ** 2
    bad = dom & ~(rss > tol)
    if bad.any():
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        raise FieldValidationError(f"zero residual norm at location {loc}")
    sigma2 = np.where(dom, rss, 1.0) / (N - P)
    z = np.where(dom, eta / np.sqrt(sigma2 * float(v @ v)), 0.0)
    return GridField(z, fit.residuals.mask)


def glm_standardized_residuals(fit: GLMFit) -> FieldSample:
    """R(s) = e(s) / |e(s)|; ``centered`` records whether sum_n R_n(s) = 0 is guaranteed."""
    res = fit.residuals
    return normalize_residuals(res.data, res.mask, centered=fit.design.has_intercept, scale=fit.scale)
