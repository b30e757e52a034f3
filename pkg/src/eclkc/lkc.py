"""Lipschitz-Killing curvature estimators.

* ``hpe_single`` / ``hpe_sample``: Hermite projection of observed EC curves.
* ``lkc_regression``: least-squares fit of the pinned average EC curve.
* ``standardize``, ``gmf_draw`` and ``bhpe``: the Gaussian multiplier
  bootstrap for fields with unknown mean/variance or non-Gaussian noise.

``hpe_fields`` is the batched workhorse. Since the EC curve jumps by minus the
signed count of cells entering at each level, the closed-form projection
reduces to a signed sum of H_d over the entry levels of all cells, so no
sorting is needed. ``hpe_single(ec_curve(f))`` is the reference it is tested
against.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ec import ECCurve, cell_filtration, resolve_connectivity
from .grid import FieldSample, FieldValidationError, GridField
from .hermite import ECDensityBasis, gauss_tail, hermite, hermite_table


@dataclass(frozen=True)
class LKCVector:
    l0: int
    lkc: np.ndarray
    cov: Optional[np.ndarray] = None
    n_used: int = 1
    estimator: str = "hpe"
    se: Optional[np.ndarray] = None
    M: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        lkc = np.atleast_1d(np.asarray(self.lkc, dtype=np.float64))
        object.__setattr__(self, "lkc", lkc)
        if self.cov is not None:
            cov = np.asarray(self.cov, dtype=np.float64).reshape(lkc.size, lkc.size)
            if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
                raise ValueError("covariance matrix must be symmetric")
            if np.any(np.diag(cov) < 0):
                raise ValueError("covariance diagonal must be non-negative")
            object.__setattr__(self, "cov", cov)
        if self.se is not None:
            object.__setattr__(self, "se", np.asarray(self.se, dtype=np.float64))

    @property
    def D(self) -> int:
        return self.lkc.size

    def to_dict(self) -> dict:
        out = {"l0": int(self.l0), "lkc": self.lkc.tolist(),
               "cov": None if self.cov is None else self.cov.tolist(),
               "n": int(self.n_used), "estimator": self.estimator,
               "M": self.M, "seed": self.seed}
        if self.se is not None:
            out["se"] = self.se.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LKCVector":
        return cls(d["l0"], d["lkc"], d.get("cov"), d.get("n", 1), d.get("estimator", "hpe"),
                   d.get("se"), d.get("M"), d.get("seed"))


def _projection_weights(D: int) -> np.ndarray:
    return np.array([(2 * np.pi) ** (d / 2) / math.factorial(d) for d in range(1, D + 1)])


def hpe_single(curve: ECCurve, D: int) -> LKCVector:
    """Hermite projection estimate from one EC curve via its critical values.

    L_d = (2 pi)^(d/2)/d! * sum_m (a_m - a_{m+1}) H_d(u_m), where a_m - a_{m+1}
    is minus the jump at u_m.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    h = hermite_table(D, curve.crit_values)[1:]
    est = -_projection_weights(D) * (h @ curve.deltas.astype(np.float64))
    return LKCVector(curve.l0, est, n_used=1)


def hpe_fields(data: np.ndarray, mask=None, connectivity=None, D: int = None,
               chunk: int = 256) -> np.ndarray:
    """Per-field HPE for a stack of fields, shape (N, *grid) -> (N, D)."""
    data = np.asarray(data, dtype=np.float64)
    dim = data.ndim - 1
    if D is None:
        D = dim
    rule = resolve_connectivity(connectivity, dim)
    if mask is not None:
        data = np.where(np.asarray(mask, dtype=bool), data, -np.inf)
    w = _projection_weights(D)
    out = np.empty((data.shape[0], D))
    for start in range(0, data.shape[0], chunk):
        block = data[start:start + chunk]
        acc = np.zeros((block.shape[0], D))
        for vals, sign in cell_filtration(block, rule):
            v = vals.reshape(block.shape[0], -1)
            finite = np.isfinite(v)
            if not finite.all():
                v = np.where(finite, v, 0.0)
            h = hermite_table(D, v)[1:]  # (D, B, cells)
            if not finite.all():
                h = h * finite
            acc += sign * h.sum(axis=2).T
        out[start:start + chunk] = acc * w
    return out


def _sample_cov(est: np.ndarray) -> np.ndarray:
    n = est.shape[0]
    centred = est - est.mean(axis=0)
    return centred.T @ centred / (n - 1)


def hpe_sample(curves: Sequence[ECCurve], D: int, with_cov: bool = True) -> LKCVector:
    """Average of per-curve HPEs with the unbiased sample covariance."""
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one curve")
    if with_cov and len(curves) < 2:
        raise ValueError("covariance needs N >= 2 curves")
    est = np.array([hpe_single(c, D).lkc for c in curves])
    return lkc_from_estimates(est, curves[0].l0, with_cov=with_cov)


def lkc_from_estimates(est: np.ndarray, l0: int, with_cov: bool = True,
                       estimator: str = "hpe") -> LKCVector:
    est = np.asarray(est, dtype=np.float64)
    cov = _sample_cov(est) if with_cov and est.shape[0] >= 2 else None
    return LKCVector(l0, est.mean(axis=0), cov, est.shape[0], estimator)


def lkc_regression(avg_curve, levels, D: int) -> LKCVector:
    """Ordinary least squares of the pinned average EC curve on rho_1..rho_D."""
    levels = np.asarray(levels, dtype=np.float64)
    if levels.size < D:
        raise ValueError(f"need at least D={D} levels, got {levels.size}")
    X = ECDensityBasis(D).densities(levels).T
    if np.linalg.matrix_rank(X) < D:
        raise np.linalg.LinAlgError("rank-deficient design: levels do not separate the EC densities")
    y = np.asarray(avg_curve.evaluate(levels), dtype=np.float64) - avg_curve.l0 * gauss_tail(levels)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    n = getattr(avg_curve, "n", 1)
    return LKCVector(int(round(avg_curve.l0)), beta, n_used=n, estimator="regression")


# ---------------------------------------------------------------------------
# Standardized residuals and the Gaussian multiplier bootstrap

DEGENERATE_RTOL = 1e-12


def normalize_residuals(e: np.ndarray, mask=None, centered: bool = True,
                        provenance: str = "standardized_residual", scale=None) -> FieldSample:
    """Scale residual fields so that sum_n R_n(s)^2 = 1 at every in-domain s.

    A location is degenerate when its residual norm is zero, or at most
    ``DEGENERATE_RTOL * scale(s)`` when the data norm ``scale`` is given
    (round-off left over from fitting an exact model).
    """
    domain = np.ones(e.shape[1:], bool) if mask is None else np.asarray(mask, bool)
    norm = np.sqrt(np.sum(e * e, axis=0))
    tol = 0.0 if scale is None else DEGENERATE_RTOL * np.asarray(scale)
    bad = domain & ~(norm > tol)
    if bad.any():
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        raise FieldValidationError(f"degenerate location {loc}: zero residual variance across the sample")
    safe = np.where(domain, norm, 1.0)
    r = np.where(domain, e / safe, 0.0)
    return FieldSample(r, mask, provenance, centered=centered)


def standardize(sample: FieldSample) -> FieldSample:
    """R_n = (f_n - mean) / sqrt(sum_n (f_n - mean)^2), pointwise."""
    if len(sample) < 2:
        raise ValueError("standardizing needs N >= 2 fields")
    data = np.where(sample.domain, sample.data, 0.0)
    centred = data - data.mean(axis=0)
    scale = np.sqrt(np.sum(data * data, axis=0))
    return normalize_residuals(centred, sample.mask, centered=True, scale=scale)


def check_residuals(res: FieldSample, atol: float = 1e-10) -> None:
    dom = res.domain
    s2 = np.sum(res.data ** 2, axis=0)[dom]
    if not np.allclose(s2, 1.0, rtol=0, atol=atol):
        raise FieldValidationError("residuals violate sum_n R_n^2 = 1")
    if res.centered:
        s1 = np.sum(res.data, axis=0)[dom]
        if not np.allclose(s1, 0.0, rtol=0, atol=atol):
            raise FieldValidationError("residuals violate sum_n R_n = 0")


def substream(seed, *key) -> np.random.SeedSequence:
    """Independent named child stream: hashable labels become spawn-key words."""
    words = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + words)
    return np.random.SeedSequence(seed, spawn_key=words)


def gmf_draw(residuals: FieldSample, rng=None, g=None) -> GridField:
    """One Gaussian multiplier field sum_n g_n R_n with g ~ N(0, I_N).

    ``g`` may be passed explicitly to force the multipliers.
    """
    n = len(residuals)
    if g is None:
        g = np.random.default_rng(rng).standard_normal(n)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (n,):
        raise ValueError(f"need {n} multipliers, got shape {g.shape}")
    vals = np.tensordot(g, residuals.data, axes=1)
    return GridField(vals, residuals.mask)


def bhpe(residuals: FieldSample, M: int = 1000, D: int = None, connectivity=None,
         seed=0, multipliers=None, chunk: int = 200) -> LKCVector:
    """Bootstrap Hermite projection estimator.

    Averages the HPE over M Gaussian multiplier fields. Replicate m draws its
    multipliers from its own stream ``substream(seed, "bootstrap", m)``, so
    the result does not depend on chunking. ``se`` is the Monte Carlo
    standard error of the mean over replicates.
    """
    check_residuals(residuals)
    N = len(residuals)
    D = residuals.dim if D is None else D
    if multipliers is not None:
        G = np.atleast_2d(np.asarray(multipliers, dtype=np.float64))
        M = G.shape[0]
    else:
        if M < 2:
            raise ValueError("bHPE needs M >= 2 bootstrap replicates")
        G = np.stack([np.random.default_rng(substream(seed, "bootstrap", m)).standard_normal(N)
                      for m in range(M)])
    flat = residuals.data.reshape(N, -1)
    est = np.empty((M, D))
    for start in range(0, M, chunk):
        fields = (G[start:start + chunk] @ flat).reshape((-1,) + residuals.shape)
        est[start:start + chunk] = hpe_fields(fields, residuals.mask, connectivity, D)
    l0 = _domain_l0(residuals, connectivity)
    se = est.std(axis=0, ddof=1) / np.sqrt(M) if M > 1 else np.full(D, np.nan)
    return LKCVector(l0, est.mean(axis=0), None, N, "bhpe", se, M,
                     seed if isinstance(seed, (int, np.integer)) else None)


def _domain_l0(sample: FieldSample, connectivity) -> int:
    from .grid import domain_ec
    return domain_ec(sample.domain, resolve_connectivity(connectivity, sample.dim)).l0


def hpe_on_sample(sample: FieldSample, D: int = None, connectivity=None) -> LKCVector:
    """HPE averaged over all fields of a sample, with covariance when N >= 2."""
    D = sample.dim if D is None else D
    est = hpe_fields(sample.data, sample.mask, connectivity, D)
    return lkc_from_estimates(est, _domain_l0(sample, connectivity))
