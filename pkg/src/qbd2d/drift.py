"""Mean drifts of the induced chains and the positive-recurrence table."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from .exceptions import DomainError, ModelError
from .model import H, ModelSpec, _irreducible_aperiodic, require_valid
from .matrix_eq import solve_R1
from . import spectral

ZERO_TOL = 1e-9

POSITIVE_RECURRENT = "positive_recurrent"
TRANSIENT = "transient"
INDETERMINATE = "indeterminate"

NORMALIZATION = "pi0 . 1 + pi1 (I - R)^-1 . 1 = 1"


def stationary_of(model_or_matrix) -> np.ndarray:
    """Stationary row vector of ``A_{*,*}`` (or of a given stochastic matrix)."""
    P = model_or_matrix.A_star if isinstance(model_or_matrix, ModelSpec) else np.asarray(model_or_matrix, float)
    n = P.shape[0]
    irr, _ = _irreducible_aperiodic(P)
    if not irr:
        raise ModelError("phase matrix is reducible; its stationary distribution is not unique")
    M = (P - np.eye(n)).T
    M[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = linalg.solve(M, b)
    return pi


def drift_interior(model: ModelSpec) -> Tuple[float, float]:
    pi = stationary_of(model)
    one = np.ones(model.s0)
    A = model.A
    row = lambda i: sum(A[(i, j)] for j in H)
    col = lambda j: sum(A[(i, j)] for i in H)
    a1 = float(pi @ (row(1) - row(-1)) @ one)
    a2 = float(pi @ (col(1) - col(-1)) @ one)
    return a1, a2


@dataclass
class BoundaryQBD:
    """Stationary data of the one-dimensional QBD induced along an axis."""

    R: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray
    drift: float
    R_residual: float
    R_iterations: int
    R_spectral_radius: float

    def level(self, k: int) -> np.ndarray:
        """Stationary block at level ``k`` (matrix-geometric beyond level 1)."""
        if k == 0:
            return self.pi0
        return self.pi1 @ np.linalg.matrix_power(self.R, k - 1)

    def meta(self) -> dict:
        return {
            "R_residual": self.R_residual,
            "R_iterations": self.R_iterations,
            "R_spectral_radius": self.R_spectral_radius,
            "normalization": NORMALIZATION,
        }


def boundary_qbd(model: ModelSpec) -> BoundaryQBD:
    """Induced QBD with level x2 and the x1-axis as its boundary.

    Requires the interior x2-drift to be negative.
    """
    a1, a2 = drift_interior(model)
    if not a2 < -ZERO_TOL:
        raise DomainError("undefined: the induced chain along the x1-axis is not positive recurrent")
    lau = model.laurent
    s0 = model.s0
    I = np.eye(s0)
    down, local = lau.x2_step(-1, 1.0), lau.x2_step(0, 1.0)
    sol = solve_R1(model, 1.0, check_domain=False)
    R = sol.M
    rho = spectral.spr(R)
    if rho >= 1.0:
        raise DomainError(f"spr(R) = {rho} >= 1; induced QBD is not positive recurrent")
    B0, B1 = lau.axis1_x2_step(0, 1.0), lau.axis1_x2_step(1, 1.0)
    M = np.block([[B0 - I, B1], [down, local + R @ down - I]])
    inv = linalg.inv(I - R)
    norm = np.concatenate([np.ones(s0), inv @ np.ones(s0)])
    # x M = 0 with one equation replaced by the normalization
    Mt = M.T.copy()
    Mt[0, :] = norm
    rhs = np.zeros(2 * s0)
    rhs[0] = 1.0
    x = linalg.solve(Mt, rhs)
    pi0, pi1 = x[:s0], x[s0:]
    one = np.ones(s0)
    A1 = model.A1
    row1 = lambda i: sum(A1[(i, j)] for j in (0, 1))
    row = lambda i: sum(model.A[(i, j)] for j in H)
    drift = float(pi0 @ (row1(1) - row1(-1)) @ one + pi1 @ inv @ (row(1) - row(-1)) @ one)
    return BoundaryQBD(R, pi0, pi1, drift, sol.residual, sol.iterations, rho)


def boundary_drift(model: ModelSpec, axis: int = 1) -> float:
    if axis == 1:
        return boundary_qbd(model).drift
    if axis == 2:
        return boundary_qbd(model.swapped()).drift
    raise ValueError("axis must be 1 or 2")


@dataclass
class DriftReport:
    a12: Tuple[float, float]
    a1_1: Optional[float]
    a2_2: Optional[float]
    classification: str
    boundary_qbd_meta: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "a12": list(self.a12),
            "a1_1": self.a1_1,
            "a2_2": self.a2_2,
            "classification": self.classification,
            "boundary_qbd_meta": self.boundary_qbd_meta,
            "messages": list(self.messages),
        }


def _sign(x: Optional[float]) -> int:
    if x is None or abs(x) <= ZERO_TOL:
        return 0
    return 1 if x > 0 else -1


def stability_table(a1: float, a2: float, a1_1: Optional[float], a2_2: Optional[float]) -> str:
    """Positive recurrence / transience from the drift signs.

    ``a1_1`` is needed when ``a2 < 0`` and ``a2_2`` when ``a1 < 0``; a zero
    (within ``ZERO_TOL``) anywhere it matters gives ``indeterminate``.
    """
    s1, s2 = _sign(a1), _sign(a2)
    if s1 == 0 or s2 == 0:
        return INDETERMINATE
    b1, b2 = _sign(a1_1), _sign(a2_2)
    if s1 < 0 and s2 < 0:
        if b1 > 0 or b2 > 0:
            return TRANSIENT
        if b1 < 0 and b2 < 0:
            return POSITIVE_RECURRENT
        return INDETERMINATE
    if s1 > 0 and s2 < 0:
        return {1: TRANSIENT, -1: POSITIVE_RECURRENT}.get(b1, INDETERMINATE)
    if s1 < 0 and s2 > 0:
        return {1: TRANSIENT, -1: POSITIVE_RECURRENT}.get(b2, INDETERMINATE)
    return TRANSIENT


def classify_stability(model: ModelSpec) -> DriftReport:
    require_valid(model)
    a1, a2 = drift_interior(model)
    meta, msgs = {}, []
    a1_1 = a2_2 = None
    if a2 < -ZERO_TOL:
        q = boundary_qbd(model)
        a1_1 = q.drift
        meta["axis1"] = q.meta()
    if a1 < -ZERO_TOL:
        q = boundary_qbd(model.swapped())
        a2_2 = q.drift
        meta["axis2"] = q.meta()
    cls = stability_table(a1, a2, a1_1, a2_2)
    if cls == INDETERMINATE:
        msgs.append("a drift within the zero tolerance decides the case; refusing to classify")
    return DriftReport((a1, a2), a1_1, a2_2, cls, meta, msgs)
