"""Command-line entry point: ``eclkc <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 invalid input, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .ec import ec_curve
from .eec import CER_ALPHA, FWER_ALPHA, EECModel, default_grid, solve_threshold
from .glm import DesignMatrix, fit_pointwise, glm_standardized_residuals, zscore_field
from .grid import FieldSample, FieldValidationError, GridField, load_field, save_field
from .lkc import LKCVector, bhpe, substream
from .sim import (IsotropicSpec, ScaleSpaceSpec, simulate_isotropic, simulate_scale_space)
from .study import ESTIMATORS, SCENARIOS, StudyConfig, default_jobs, estimate, run_study, write_rows

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3, 4
FAMILIES = ("isotropic", "scalespace")


class UsageError(Exception):
    pass


def _atomic_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_via(path, writer) -> None:
    """Run ``writer(tmp_path)`` then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FieldValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise FieldValidationError(f"{path}: expected a JSON object")
    return cfg


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like lo:hi:step") from None
    if not (hi > lo and step > 0):
        raise argparse.ArgumentTypeError("grid needs hi > lo and step > 0")
    return default_grid(lo, hi, step)


def _load_sample(paths) -> FieldSample:
    return FieldSample.from_fields([load_field(p) for p in paths])


def _connectivity(args):
    return getattr(args, "connectivity", None)


# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _read_json(args.config)
    family = cfg.pop("family", "isotropic")
    if family not in FAMILIES:
        raise UsageError(f"unknown field family {family!r}; choose from {FAMILIES}")
    n = int(cfg.pop("n", 1))
    if n < 1:
        raise FieldValidationError("n must be >= 1")
    try:
        spec = IsotropicSpec(**cfg) if family == "isotropic" else ScaleSpaceSpec(**cfg)
    except TypeError as exc:
        raise FieldValidationError(f"bad field parameters: {exc}") from None
    rng = np.random.default_rng(substream(args.seed, "simulate"))
    sim = simulate_isotropic if family == "isotropic" else simulate_scale_space
    sample = sim(spec, n, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(n - 1)))
    for k, f in enumerate(sample):
        save_field(f, out / f"field_{k:0{width}d}.fldb")
    print(json.dumps({"family": family, "n": n, "shape": list(sample.shape), "out": str(out)}))
    return EXIT_OK


def cmd_ec_curve(args) -> int:
    curve = ec_curve(load_field(args.input), _connectivity(args))
    if args.out:
        curve.to_csv(args.out)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["u", "delta", "chi_after"])
        for u, d, a in zip(curve.crit_values, curve.deltas, curve.levels[1:]):
            w.writerow([repr(float(u)), int(d), int(a)])
    return EXIT_OK


def _estimate(args) -> LKCVector:
    sample = _load_sample(args.inputs)
    return estimate(sample, args.estimator, args.scenario, args.D, _connectivity(args),
                    args.bootstrap_m, args.seed)


def cmd_estimate_lkc(args) -> int:
    lkc = _estimate(args)
    text = lkc.to_json()
    if args.out:
        _atomic_text(args.out, text + "\n")
    print(text)
    return EXIT_OK


def _thresholds(model: EECModel) -> dict:
    return {"fwer": solve_threshold(model, FWER_ALPHA).to_dict(),
            "cer": solve_threshold(model, CER_ALPHA).to_dict()}


def cmd_estimate_eec(args) -> int:
    lkc = _estimate(args)
    model = EECModel(lkc)
    grid = default_grid() if args.grid is None else args.grid
    _atomic_via(args.out, lambda p: model.to_csv(p, grid, args.alpha))
    res = {"lkc": lkc.to_dict(), "thresholds": _thresholds(model)}
    print(json.dumps(res))
    return EXIT_OK


def cmd_threshold(args) -> int:
    if args.lkc:
        lkc = LKCVector.from_dict(_read_json(args.lkc))
    elif args.inputs:
        lkc = _estimate(args)
    else:
        raise UsageError("threshold needs --lkc FILE or input fields")
    alpha = FWER_ALPHA if args.alpha is None else args.alpha
    res = solve_threshold(EECModel(lkc), alpha, (args.lo, args.hi))
    print(res.to_json())
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = _read_json(args.config)
    if cfg.get("family", "isotropic") not in FAMILIES:
        raise UsageError(f"unknown field family {cfg['family']!r}; choose from {FAMILIES}")
    for key in ("seed", "scenario", "connectivity"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.estimator:
        cfg["estimators"] = [args.estimator]
    if args.bootstrap_m is not None:
        cfg["bootstrap_m"] = args.bootstrap_m
    try:
        config = StudyConfig.from_dict(cfg)
    except TypeError as exc:
        raise FieldValidationError(f"bad study config: {exc}") from None
    jobs = default_jobs() if args.jobs is None else args.jobs
    rows = run_study(config, jobs)
    _atomic_via(args.out, lambda p: write_rows(rows, p))
    summary = [r for r in rows if r["kind"] != "run"]
    print(json.dumps(summary))
    return EXIT_OK


def cmd_glm_fit(args) -> int:
    sample = _load_sample(args.inputs)
    contrast = None if args.contrast is None else [float(x) for x in args.contrast.split(",")]
    design = DesignMatrix.from_csv(args.design, contrast)
    fit = fit_pointwise(sample, design, args.smooth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = {"out": str(out)}
    if design.contrast is not None:
        save_field(zscore_field(fit), out / "zscore.fldb")
        result["zscore"] = str(out / "zscore.fldb")
    res = glm_standardized_residuals(fit)
    width = max(4, len(str(len(res) - 1)))
    for k in range(len(res)):
        save_field(GridField(res.data[k], res.mask), out / f"residual_{k:0{width}d}.fldb")
    if args.bootstrap_m:
        lkc = bhpe(res, args.bootstrap_m, args.D, _connectivity(args), args.seed)
        result["lkc"] = lkc.to_dict()
    print(json.dumps(result))
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(p, estimator=False, seed=True):
    p.add_argument("--connectivity", type=int, choices=(2, 4, 8, 6, 26), default=None,
                   help="neighbourhood rule; default 2 in 1D, 4 in 2D, 6 in 3D")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if estimator:
        p.add_argument("--estimator", choices=ESTIMATORS, default="hpe")
        p.add_argument("--scenario", choices=SCENARIOS, default="theoretical")
        p.add_argument("--bootstrap-m", type=int, default=1000)
        p.add_argument("--D", type=int, default=None, help="highest LKC order; default: field dimension")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eclkc", description="EC curves, LKC estimation and EEC inference.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write simulated fields as FLDB files")
    p.add_argument("config", help="JSON with family, n and field parameters")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ec-curve", help="EC curve of one field")
    p.add_argument("input")
    p.add_argument("--out", help="CSV path (u,delta,chi_after); stdout if omitted")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_ec_curve)

    p = sub.add_parser("estimate-lkc", help="estimate LKCs from a sample of fields")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", help="also write the JSON here")
    _add_common(p, estimator=True)
    p.set_defaults(func=cmd_estimate_lkc)

    p = sub.add_parser("estimate-eec", help="EEC curve with bands, plus FWER/CER thresholds")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True, help="CSV path (u,eec,lo,hi)")
    p.add_argument("--grid", type=_parse_grid, default=None, help="lo:hi:step, default -5:5:0.01")
    p.add_argument("--alpha", type=float, default=0.05, help="band level")
    _add_common(p, estimator=True)
    p.set_defaults(func=cmd_estimate_eec)

    p = sub.add_parser("threshold", help="solve EEC(u) = alpha")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--lkc", help="LKC JSON produced by estimate-lkc")
    p.add_argument("--alpha", type=float, default=None, help="target EEC level, default 0.05")
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=8.0)
    _add_common(p, estimator=True)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("study", help="Monte Carlo study of LKC estimators")
    p.add_argument("config", help="JSON study configuration")
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--connectivity", type=int, choices=(2, 4, 8, 6, 26), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scenario", choices=SCENARIOS, default=None)
    p.add_argument("--estimator", choices=ESTIMATORS, default=None)
    p.add_argument("--bootstrap-m", type=int, default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("glm-fit", help="pointwise GLM: z-score field and standardized residuals")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--design", required=True, help="CSV design matrix, one row per field")
    p.add_argument("--contrast", help="comma-separated contrast weights")
    p.add_argument("--smooth", type=float, default=None, help="residual smoothing sd in grid units")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bootstrap-m", type=int, default=0, help="if > 0, also report bHPE of the residuals")
    p.add_argument("--D", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_glm_fit)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"eclkc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"eclkc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"eclkc: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
