"""``qbd2d`` command-line front end.

Exit status: 0 success, 2 invalid or inadmissible model, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import config, decay, drift, matrix_eq, oracle, spectral
from .exceptions import ConvergenceError, QBDError
from .model import load_model, validate

COMMANDS = ("validate", "stability", "curves", "solve", "decay", "verify", "report")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3


@dataclass
class RunConfig:
    model_path: Path
    command: str
    tolerances: dict = field(default_factory=dict)
    N: int = 80
    n: int = 50
    z: Optional[float] = None
    kind: str = "G1"
    output_path: Optional[Path] = None
    format: str = "json"
    verbose: bool = False


class _Invalid(Exception):
    pass


def _clean(obj):
    """Make a report JSON-safe: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def _validate(model):
    rep = validate(model)
    return rep.to_dict(), rep.ok


def _stability(model):
    return drift.classify_stability(model).to_dict()


def _decay(model, geometry=None):
    return decay.analyze(model, geometry).to_dict()


def _solve(model, z, kind):
    if z is None:
        raise _Invalid("--z is required for solve")
    sol = matrix_eq.solve(model, z, kind)
    out = sol.to_dict()
    out["spectral_radius"] = spectral.spr(sol.M)
    return out


def _verify(model, N, geometry=None):
    rep = decay.analyze(model, geometry)
    dist = oracle.truncated_stationary(model, N)
    out = {"decay": rep.to_dict(), "oracle": {"N": N, "residual": dist.residual}}
    for ax, r in ((1, rep.r1), (2, rep.r2)):
        fit = oracle.tail_fit(dist, ax)
        out["oracle"][f"tail_fit{ax}"] = fit.to_dict()
        out[f"relative_error_r{ax}"] = abs(fit.r_hat - r) / r
        if not fit.reliable:
            rep.warnings.append(f"tail fit {ax} has R^2 {fit.r_squared:.6f} < 0.999")
    out["decay"]["warnings"] = list(rep.warnings)
    return out


def _curves(model, n):
    return spectral.sample_curve(model, n)


def execute(cfg: RunConfig):
    """Run one command; returns ``(exit status, payload text)``."""
    model = load_model(cfg.model_path)
    if cfg.command == "validate":
        rep, ok = _validate(model)
        return (EXIT_OK if ok else EXIT_INVALID), rep
    rep, ok = _validate(model)
    if not ok:
        raise _Invalid("model failed validation: " + "; ".join(rep["messages"]))
    if cfg.command == "stability":
        return EXIT_OK, _stability(model)
    if cfg.command == "curves":
        return EXIT_OK, _curves(model, cfg.n)
    if cfg.command == "solve":
        return EXIT_OK, _solve(model, cfg.z, cfg.kind)
    if cfg.command == "decay":
        return EXIT_OK, _decay(model)
    if cfg.command == "verify":
        return EXIT_OK, _verify(model, cfg.N)
    if cfg.command == "report":
        g = spectral.extreme_points(model)
        out = {
            "validation": rep,
            "stability": _stability(model),
            "geometry": g.to_dict(),
            "curve": [list(p) for p in spectral.sample_curve(model, cfg.n, g)],
        }
        v = _verify(model, cfg.N, g)
        out["decay"] = v.pop("decay")
        out["verify"] = v
        return EXIT_OK, out
    raise _Invalid(f"unknown command {cfg.command!r}")


def _render(cfg: RunConfig, payload, tolerances: dict) -> str:
    if cfg.command == "curves":
        if cfg.format == "csv":
            return spectral.curve_csv(payload)
        payload = {"curve": [list(p) for p in payload]}
    elif cfg.format == "csv":
        raise _Invalid(f"csv output is only available for curves, not {cfg.command}")
    payload = dict(payload)
    payload["tolerances"] = tolerances
    payload["command"] = cfg.command
    return dumps(payload)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qbd2d", description="Tail asymptotics of two-dimensional QBD processes.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", required=True, type=Path, help="model JSON file")
    p.add_argument("--n", type=int, default=50, help="curve sample count")
    p.add_argument("--z", type=float, help="parameter for solve")
    p.add_argument("--kind", choices=sorted(matrix_eq.SOLVERS), default="G1")
    p.add_argument("--N", type=int, default=80, help="oracle truncation level")
    p.add_argument("--out", type=Path, help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--tol", action="append", default=[], metavar="KEY=VAL", help="tolerance override")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        tol = config.parse_overrides(args.tol)
    except ValueError as exc:
        parser.error(str(exc))
    cfg = RunConfig(args.model, args.command, tol, args.N, args.n, args.z, args.kind, args.out, args.format, args.verbose)
    try:
        with config.overrides(tol):
            status, payload = execute(cfg)
            text = _render(cfg, payload, config.current())
    except ConvergenceError as exc:
        print(f"qbd2d: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (QBDError, _Invalid, OSError) as exc:
        print(f"qbd2d: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if cfg.output_path:
        cfg.output_path.write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.verbose:
        print(f"qbd2d: {cfg.command} finished with status {status}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
