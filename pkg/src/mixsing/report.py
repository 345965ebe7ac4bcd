"""Experiment orchestration: validate, solve, rearrange, compare, bound-check."""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import HypothesisViolation, MixsingError
from .grid import GridFunction, build_grid
from .operators import build_operator
from .problem import classify_regime, validate_hypotheses
from .rearrange import decreasing_rearrangement
from .solver import equiintegrability_check, solve_limit, uniqueness_probe
from .talenti import comparison_profile, orlicz_sup, summability_bounds, talenti_margin


@dataclass
class RunManifest:
    config: dict
    versions: dict
    wall_times: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    passed: bool = False
    exit_status: int = 0
    error: dict = None

    def to_dict(self):
        return {"config": self.config, "versions": self.versions, "wall_times": self.wall_times,
                "files": self.files, "pass": self.passed, "exit_status": self.exit_status,
                "error": self.error}


class PhaseError(MixsingError):
    """Wraps an error with the phase it came from."""

    def __init__(self, phase, exc):
        super().__init__(f"[{phase}] {exc}", code=getattr(exc, "code", "error"),
                         report=getattr(exc, "report", None))
        self.phase = phase
        self.exit_status = getattr(exc, "exit_status", 1)
        self.__cause__ = exc


def _versions():
    return {"mixsing": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_manifest(outdir, manifest):
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config, output=None) -> RunManifest:
    """Run every enabled phase and write the output directory.

    Returns the manifest; ``manifest.exit_status`` is 0 when every enabled
    check passed and 1 otherwise. Invalid input and solver failures raise a
    :class:`PhaseError` carrying the original exit status.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    outdir = output or cfg.output
    os.makedirs(outdir, exist_ok=True)
    manifest = RunManifest(cfg.to_dict(), _versions())
    report = {"config": cfg.to_dict(), "checks": {}}
    checks = report["checks"]
    clock = time.perf_counter

    def phase(name, fn):
        t0 = clock()
        try:
            return fn()
        except MixsingError as exc:
            raise PhaseError(name, exc) from exc
        finally:
            manifest.wall_times[name] = clock() - t0

    def pipeline():
        spec = phase("config", cfg.problem_spec)
        grid = phase("grid", lambda: build_grid(spec.domain, int(cfg.grid["N"])))
        validation = phase("validate", lambda: validate_hypotheses(spec, grid))
        report["hypotheses"] = validation.to_dict()
        if not validation.passed:
            names = ", ".join(c.name for c in validation.failures())
            raise PhaseError("validate", HypothesisViolation(f"hypotheses fail: {names}", report=validation))

        op = phase("assemble", lambda: build_operator(grid, spec.s))
        f = phase("sample", lambda: spec.f.sample(grid))
        U, lim = phase("solve", lambda: solve_limit(op, spec, f_samples=f))
        report["solve"] = lim.to_dict()
        report["solution"] = {"min": float(U.values.min()), "max": float(U.values.max()),
                              "interior_min_positive": bool(U.values.min() > 0)}
        h = grid.h
        n = grid.n

        u_star = phase("rearrange", lambda: decreasing_rearrangement(U))
        f_star = decreasing_rearrangement(f)
        files = {"solution.csv": U.to_csv(), "profile.csv": u_star.to_csv()}

        if cfg.checks.get("energy"):
            ok = all(r.apriori_satisfied for r in lim.reports)
            checks["energy"] = {"pass": ok, "levels_checked": len(lim.reports),
                                "monotonicity_violation": lim.monotonicity_violation,
                                "max_residual": max(r.final_residual_maxnorm for r in lim.reports),
                                "min_value": float(U.values.min())}
            checks["energy"]["pass"] = bool(ok and lim.monotonicity_violation <= 1e-8
                                            and U.values.min() >= -1e-12)

        if cfg.checks.get("talenti"):
            def compare():
                v_star = comparison_profile(f_star, n)
                tol = cfg.tolerances.get("talenti")
                tol = 0.05 * U.max_abs() + 2 * h if tol is None else float(tol)
                return talenti_margin(u_star, v_star, spec.nonlinearity.gamma, tol)
            cmp = phase("compare", compare)
            checks["talenti"] = cmp.to_dict()
            files["comparison.csv"] = cmp.to_csv()

        if cfg.checks.get("bounds"):
            def bounds():
                gam, m = spec.nonlinearity.gamma, spec.m
                f_norm = f.lp_norm(m)
                if f_norm == 0:
                    return {"pass": True, "status": "n/a", "detail": "f ≡ 0"}
                regime = classify_regime(gam, m, n, spec.nonlinearity.q)
                rep = summability_bounds(n, m, gam, spec.domain.volume, f_norm)
                if rep.case == "i":
                    lhs = U.lp_norm(rep.p)
                elif rep.case == "ii":
                    lhs = U.max_abs()
                else:
                    lhs = orlicz_sup(u_star, n, gam).value
                rep.lhs_value, rep.passed = float(lhs), bool(lhs <= rep.rhs_value)
                return {**rep.to_dict(), "regime": regime.to_dict()}
            checks["bounds"] = phase("bounds", bounds)

        if cfg.checks.get("uniqueness"):
            diff = phase("uniqueness", lambda: uniqueness_probe(
                op, spec, [None, GridFunction(grid, np.ones(grid.size))]))
            checks["uniqueness"] = {"max_difference": diff, "pass": bool(diff <= 1e-8)}

        if cfg.checks.get("equiintegrability"):
            k = U.max_abs() / 2
            if k > 0:
                margin = phase("equiintegrability",
                               lambda: equiintegrability_check(op, U, spec, k / 4, k, lim.n_levels[-1]))
            else:
                margin = 0.0
            checks["equiintegrability"] = {"k": k, "eta": k / 4, "margin": margin,
                                           "pass": bool(margin >= -1e-10)}

        manifest.passed = all(c.get("pass", True) for c in checks.values())
        manifest.exit_status = 0 if manifest.passed else 1
        report["pass"] = manifest.passed
        files["report.json"] = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
        for name, text in files.items():
            path = os.path.join(outdir, name)
            with open(path, "w") as fh:
                fh.write(text)
            manifest.files[name] = {"sha256": _sha256(path), "bytes": os.path.getsize(path)}

    try:
        pipeline()
    except PhaseError as exc:
        manifest.exit_status = exc.exit_status
        manifest.error = {"phase": exc.phase, "code": exc.code, "message": str(exc)}
        _write_manifest(outdir, manifest)
        raise
    _write_manifest(outdir, manifest)
    return manifest
