"""Estimation pipelines and the Monte Carlo study harness.

A study draws ``runs`` independent samples of N fields for every N in the
config, applies each estimator, and reports one row per (estimator, N, run)
plus mean/sd summaries and, optionally, pointwise band coverage of the true
EEC. All randomness comes from ``substream(seed, <name>, ...)`` so every run
is reproducible on its own and results do not depend on ``jobs``.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .ec import average_curves, ec_curve, ec_values
from .eec import EECModel, band_from_values
from .grid import FieldSample
from .lkc import (LKCVector, bhpe, hpe_fields, lkc_from_estimates, lkc_regression,
                  normalize_residuals, standardize, substream, _domain_l0)
from .sim import (IsotropicSpec, ScaleSpaceSpec, simulate_isotropic, simulate_scale_space,
                  true_lkc_isotropic, true_lkc_scale_space)

ESTIMATORS = ("hpe", "bhpe", "regression")
SCENARIOS = ("theoretical", "experimental")
DEFAULT_LEVELS = np.linspace(-4.0, 4.0, 41)


def unit_residuals(sample: FieldSample) -> FieldSample:
    """Known-mean residuals f_n / sqrt(sum_n f_n^2) for the theoretical scenario."""
    return normalize_residuals(sample.data, sample.mask, centered=False)


def studentized(residuals: FieldSample) -> FieldSample:
    """sqrt(N - 1) R_n = (f_n - mean) / sd: unit-variance fields for the plain HPE."""
    n = len(residuals)
    return FieldSample(np.sqrt(n - 1) * residuals.data, residuals.mask, residuals.provenance)


def estimate(sample: FieldSample, estimator: str = "hpe", scenario: str = "theoretical",
             D: int = None, connectivity=None, bootstrap_m: int = 1000, seed=0,
             levels=None) -> LKCVector:
    """Run one estimator on a sample.

    The experimental scenario standardizes the sample first; the theoretical
    one treats it as mean zero, variance one.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    D = sample.dim if D is None else D
    N = len(sample)
    if scenario == "experimental" and N < 2:
        raise ValueError("the experimental scenario needs N >= 2 fields")
    if estimator == "bhpe":
        if N < 2:
            raise ValueError("bHPE needs N >= 2 fields")
        res = standardize(sample) if scenario == "experimental" else unit_residuals(sample)
        return bhpe(res, bootstrap_m, D, connectivity, seed)
    fields = studentized(standardize(sample)) if scenario == "experimental" else sample
    if estimator == "hpe":
        est = hpe_fields(fields.data, fields.mask, connectivity, D)
        return lkc_from_estimates(est, _domain_l0(sample, connectivity))
    levels = DEFAULT_LEVELS if levels is None else np.asarray(levels)
    avg = average_curves([ec_curve(f, connectivity) for f in fields])
    return lkc_regression(avg, levels, D)


@dataclass
class StudyConfig:
    family: str = "isotropic"
    L: float = 50
    nu: float = 5.0
    gamma: Sequence[float] = (4.0, 15.0)
    n_t: int = 128
    n_gamma: int = 32
    noise: str = "gaussian"
    scenario: str = "theoretical"
    estimators: Sequence[str] = ("hpe",)
    N: Sequence[int] = (10,)
    runs: int = 100
    seed: int = 0
    connectivity: Optional[int] = None
    bootstrap_m: int = 1000
    coverage_u: Sequence[float] = ()
    alpha_level: float = 0.05

    def __post_init__(self):
        if self.family not in ("isotropic", "scalespace"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimators {sorted(bad)}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if any(int(n) < 1 for n in self.N):
            raise ValueError("sample sizes must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    def field_spec(self):
        if self.family == "isotropic":
            return IsotropicSpec(int(self.L), float(self.nu), self.noise)
        g1, g2 = self.gamma
        return ScaleSpaceSpec(float(self.L), float(g1), float(g2), int(self.n_t),
                              int(self.n_gamma), self.noise)

    def true_lkc(self) -> LKCVector:
        spec = self.field_spec()
        if self.family == "isotropic":
            return true_lkc_isotropic(spec)
        return true_lkc_scale_space(spec)


def simulate(spec, n: int, rng) -> FieldSample:
    if isinstance(spec, IsotropicSpec):
        return simulate_isotropic(spec, n, rng)
    return simulate_scale_space(spec, n, rng)


def _one_run(args):
    cfg, N, run = args
    spec = cfg.field_spec()
    sample = simulate(spec, N, substream(cfg.seed, "simulate", N, run))
    truth = EECModel(cfg.true_lkc())
    u = np.asarray(cfg.coverage_u, dtype=np.float64)
    rows = []
    for est_name in cfg.estimators:
        if est_name == "bhpe" and N < 2:
            continue
        lk = estimate(sample, est_name, cfg.scenario, 2, cfg.connectivity, cfg.bootstrap_m,
                      substream(cfg.seed, "bootstrap", N, run))
        row = {"kind": "run", "estimator": est_name, "N": N, "run": run}
        for d, v in enumerate(lk.lkc, start=1):
            row[f"L{d}"] = float(v)
        if u.size and est_name == "hpe" and N >= 2:
            tv = truth.evaluate(u)
            lo, hi = EECModel(lk).band(u, cfg.alpha_level)
            raw = ec_values(sample.data, u, sample.mask, cfg.connectivity)
            nlo, nhi = band_from_values(raw, cfg.alpha_level)
            for k, uk in enumerate(u):
                row[f"cover_hpe_{uk:g}"] = int(lo[k] <= tv[k] <= hi[k])
                row[f"cover_np_{uk:g}"] = int(nlo[k] <= tv[k] <= nhi[k])
                row[f"halfwidth_hpe_{uk:g}"] = float((hi[k] - lo[k]) / 2)
                row[f"halfwidth_np_{uk:g}"] = float((nhi[k] - nlo[k]) / 2)
        rows.append(row)
    return rows


def run_study(cfg: StudyConfig, jobs: int = 1) -> List[dict]:
    tasks = [(cfg, int(N), run) for N in cfg.N for run in range(cfg.runs)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_one_run, tasks))
    else:
        chunks = [_one_run(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    return rows + summarize(rows)


def summarize(rows: List[dict]) -> List[dict]:
    out = []
    keys = sorted({(r["estimator"], r["N"]) for r in rows if r["kind"] == "run"},
                  key=lambda k: (ESTIMATORS.index(k[0]), k[1]))
    for est, N in keys:
        group = [r for r in rows if r["kind"] == "run" and r["estimator"] == est and r["N"] == N]
        cols = [c for c in group[0] if c not in ("kind", "estimator", "N", "run")]
        mat = np.array([[r[c] for c in cols] for r in group], dtype=np.float64)
        mean = {"kind": "mean", "estimator": est, "N": N, "run": len(group)}
        sd = {"kind": "sd", "estimator": est, "N": N, "run": len(group)}
        for j, c in enumerate(cols):
            mean[c] = float(mat[:, j].mean())
            sd[c] = float(mat[:, j].std(ddof=1)) if len(group) > 1 else float("nan")
        out += [mean, sd]
    return out


def write_rows(rows: List[dict], path) -> None:
    cols = ["kind", "estimator", "N", "run"]
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
