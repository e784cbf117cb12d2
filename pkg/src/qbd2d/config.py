"""Named numerical tolerances and a scoped override mechanism.

Each key maps to a module-level constant; overrides are applied for the
duration of a ``with overrides(...)`` block and restored afterwards.
"""
from __future__ import annotations

import contextlib
import importlib

TOLERANCES = {
    "stochastic": ("qbd2d.model", "STOCHASTIC_TOL"),
    "perron": ("qbd2d.spectral", "POWER_TOL"),
    "root_xtol": ("qbd2d.spectral", "ROOT_XTOL"),
    "coincident": ("qbd2d.spectral", "COINCIDENT_RTOL"),
    "degenerate": ("qbd2d.spectral", "DEGENERATE_TOL"),
    "functional": ("qbd2d.matrix_eq", "FUNCTIONAL_TOL"),
    "residual": ("qbd2d.matrix_eq", "RESIDUAL_TOL"),
    "eigen_gap": ("qbd2d.matrix_eq", "GAP_TOL"),
    "zero_drift": ("qbd2d.drift", "ZERO_TOL"),
    "type_tie": ("qbd2d.decay", "TYPE_TOL"),
    "psi_equality": ("qbd2d.decay", "PSI_RTOL"),
    "oracle_residual": ("qbd2d.oracle", "RESIDUAL_TOL"),
}


def current() -> dict:
    out = {}
    for key, (mod, attr) in sorted(TOLERANCES.items()):
        out[key] = getattr(importlib.import_module(mod), attr)
    return out


def parse_overrides(items) -> dict:
    """Parse ``key=value`` strings, rejecting unknown keys."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ValueError(f"tolerance override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        key = key.strip()
        if key not in TOLERANCES:
            raise ValueError(f"unknown tolerance key {key!r}; known keys: {', '.join(sorted(TOLERANCES))}")
        v = float(val)
        if not v > 0:
            raise ValueError(f"tolerance {key} must be positive")
        out[key] = v
    return out


@contextlib.contextmanager
def overrides(values: dict):
    saved = []
    try:
        for key, v in values.items():
            mod, attr = TOLERANCES[key]
            m = importlib.import_module(mod)
            saved.append((m, attr, getattr(m, attr)))
            setattr(m, attr, v)
        yield
    finally:
        for m, attr, old in reversed(saved):
            setattr(m, attr, old)
