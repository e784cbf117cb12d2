"""Stationary tail asymptotics of discrete-time two-dimensional QBD processes."""
from .exceptions import ConvergenceError, DegenerateGeometryError, DomainError, ModelError, QBDError
from .model import ModelSpec, load_model, reflecting_model, save_model, validate

__all__ = [
    "ConvergenceError",
    "DegenerateGeometryError",
    "DomainError",
    "ModelError",
    "ModelSpec",
    "QBDError",
    "load_model",
    "reflecting_model",
    "save_model",
    "validate",
]
__version__ = "0.1.0"
