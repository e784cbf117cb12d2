"""Brute-force stationary distribution of the process truncated to [0, N]^2.

Used as ground truth for the decay rates, exponents and the key identity
linking the two boundary generating functions.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .exceptions import ConvergenceError, DomainError
from .model import ModelSpec, require_valid
from .matrix_eq import solve_G1
from . import drift

RESIDUAL_TOL = 1e-12
MAX_SWEEPS = 10_000_000
POLISH_SWEEPS = 3


@dataclass
class TruncatedDistribution:
    N: int
    nu: np.ndarray  # shape (N+1, N+1, s0)
    residual: float
    solver_iterations: int

    def axis_mass(self, direction: int) -> np.ndarray:
        """``nu_{k,0} 1`` (direction 1) or ``nu_{0,k} 1`` (direction 2)."""
        return self.axis_vectors(direction).sum(axis=1)

    def axis_vectors(self, direction: int) -> np.ndarray:
        if direction == 1:
            return self.nu[:, 0, :]
        if direction == 2:
            return self.nu[0, :, :]
        raise ValueError("direction must be 1 or 2")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "l", "j", "nu"])
        for (k, l, j), v in np.ndenumerate(self.nu):
            w.writerow([k, l, j, repr(float(v))])
        return buf.getvalue()


def _family_of(k, l):
    if k > 0 and l > 0:
        return "A"
    if k > 0:
        return "A1"
    if l > 0:
        return "A2"
    return "A0"


def truncated_matrix(model: ModelSpec, N: int) -> sparse.csr_matrix:
    """Transition matrix on ``[0, N]^2 x phases``.

    A move that would leave the box is clamped to the edge in the offending
    coordinate; the phase transition is kept.  Rows stay stochastic.
    """
    s0 = model.s0
    L = N + 1
    idx = lambda k, l: (k * L + l) * s0
    rows, cols, vals = [], [], []
    ks, ls = np.meshgrid(np.arange(L), np.arange(L), indexing="ij")
    for fam in ("A", "A1", "A2", "A0"):
        mask = np.zeros((L, L), bool)
        if fam == "A":
            mask[1:, 1:] = True
        elif fam == "A1":
            mask[1:, 0] = True
        elif fam == "A2":
            mask[0, 1:] = True
        else:
            mask[0, 0] = True
        k0, l0 = ks[mask], ls[mask]
        for (di, dj), B in getattr(model, fam).items():
            nz = np.argwhere(B > 0)
            if len(nz) == 0:
                continue
            k1 = np.minimum(k0 + di, N)
            l1 = np.minimum(l0 + dj, N)
            src = idx(k0, l0)
            dst = idx(k1, l1)
            for a, b in nz:
                rows.append(src + a)
                cols.append(dst + b)
                vals.append(np.full(src.shape, B[a, b]))
    n = L * L * s0
    P = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    P.sum_duplicates()
    return P


def truncated_stationary(model: ModelSpec, N: int, check_stability: bool = True) -> TruncatedDistribution:
    """Stationary distribution of the truncated chain.

    A sparse direct solve (one balance equation replaced by the
    normalization) gives the starting point; power-iteration sweeps then
    polish it and the fixed-point residual is reported.
    """
    if N < 10:
        raise ValueError("N must be at least 10")
    if check_stability:
        rep = drift.classify_stability(model)
        if rep.classification != drift.POSITIVE_RECURRENT:
            raise DomainError(f"model is {rep.classification}; the oracle needs positive recurrence")
    else:
        require_valid(model)
    P = truncated_matrix(model, N)
    n = P.shape[0]
    PT = P.T.tocsr()
    M = (PT - sparse.identity(n, format="csr")).tolil()
    M[0, :] = np.ones(n)
    b = np.zeros(n)
    b[0] = 1.0
    x = splinalg.spsolve(M.tocsc(), b)
    x = np.maximum(x, 0.0)
    x /= x.sum()
    sweeps = 0
    res = float(np.abs(PT @ x - x).sum())
    while res > RESIDUAL_TOL * 1e-2 and sweeps < POLISH_SWEEPS:
        x = PT @ x
        x /= x.sum()
        sweeps += 1
        res = float(np.abs(PT @ x - x).sum())
    # fall back to plain sweeps only if the direct solve was poor
    while res > RESIDUAL_TOL:
        if sweeps >= MAX_SWEEPS:
            raise ConvergenceError("power iteration hit the sweep cap", partial=x, residual=res)
        for _ in range(100):
            x = PT @ x
        x /= x.sum()
        sweeps += 100
        res = float(np.abs(PT @ x - x).sum())
    nu = x.reshape(N + 1, N + 1, model.s0)
    return TruncatedDistribution(N, nu, res, sweeps)


@dataclass
class TailFit:
    direction: int
    r_hat: float
    alpha_hat: float
    r_squared: float
    k_range: tuple

    @property
    def reliable(self) -> bool:
        return self.r_squared >= 0.999

    def to_dict(self):
        return {
            "direction": self.direction,
            "r_hat": self.r_hat,
            "alpha_hat": self.alpha_hat,
            "r_squared": self.r_squared,
            "k_range": list(self.k_range),
            "reliable": self.reliable,
        }


def fit_sequence(mass, k_min: int, k_max: int, direction: int = 1) -> TailFit:
    """Least squares of ``log mass_k`` on ``[1, log k, k]`` over ``[k_min, k_max]``."""
    k = np.arange(k_min, k_max + 1)
    y = np.asarray(mass, float)[k]
    if np.any(y <= 0):
        raise DomainError("nonpositive masses in the fit window; truncation too small")
    ly = np.log(y)
    X = np.column_stack([np.ones_like(k, float), np.log(k), k.astype(float)])
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    fitted = X @ coef
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return TailFit(direction, float(math.exp(-coef[2])), float(coef[1] + 1.0), r2, (int(k_min), int(k_max)))


def tail_fit(dist: TruncatedDistribution, direction: int, k_min=None, k_max=None) -> TailFit:
    N = dist.N
    k_min = N // 4 if k_min is None else k_min
    k_max = (3 * N) // 4 if k_max is None else k_max
    if k_max > 0.75 * N + 1e-9:
        raise ValueError("k_max must not exceed 0.75 N")
    return fit_sequence(dist.axis_mass(direction), max(k_min, 1), k_max, direction)


def partial_generating(dist: TruncatedDistribution, which: str, z: float, K: int) -> np.ndarray:
    """``sum_{k=1..K} nu_{k,0} z^k`` (phi1) or ``sum nu_{0,k} z^k`` (phi2)."""
    if K > dist.N:
        raise ValueError("K must not exceed N")
    vecs = dist.axis_vectors(1 if which == "phi1" else 2 if which == "phi2" else 0)
    k = np.arange(1, K + 1)
    terms = vecs[1 : K + 1] * (z ** k)[:, None]
    if K >= 2 and np.abs(terms[-1]).sum() > np.abs(terms[0]).sum() * 1e3:
        raise DomainError("partial sums look divergent: z is too large")
    return terms.sum(axis=0) if K else np.zeros(vecs.shape[1])


def key_expression_sides(model: ModelSpec, dist: TruncatedDistribution, z: float, K: int):
    """Both sides of the identity tying phi1 to phi2 at ``X = G1(z)``.

    ``phi1(z) (I - C1(z, X)) = sum_j nu_{0,j} (C2hat(z, X) - X) X^{j-1} + nu_{0,0} (C0(z, X) - I)``.
    The multiplied form avoids inverting ``I - C1``, which is singular at
    ``z = 1`` whenever psi1(1) = 1.
    """
    lau = model.laurent
    X = solve_G1(model, z).M
    I = np.eye(model.s0)
    phi1 = partial_generating(dist, "phi1", z, K)
    lhs = phi1 @ (I - lau.C1_mat(z, X))
    C2h = lau.C2_hat(z, X) - X
    acc = np.zeros(model.s0)
    P = np.eye(model.s0)
    for j in range(1, K + 1):
        acc = acc + dist.nu[0, j] @ C2h @ P
        P = P @ X
    rhs = acc + dist.nu[0, 0] @ (lau.C0_mat(z, X) - I)
    return lhs, rhs


def key_expression_residual(model: ModelSpec, dist: TruncatedDistribution, z: float, K: int) -> float:
    lhs, rhs = key_expression_sides(model, dist, z, K)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class GeometricCheck:
    R_hat: np.ndarray
    worst_ratio: float
    n_range: tuple


def matrix_geometric_check(dist: TruncatedDistribution, direction: int = 1) -> GeometricCheck:
    """Fit ``nu_{n+1} ~ nu_n R`` on ``[N/4, N/3)`` and test it on ``[N/3, N/2]``."""
    V = dist.axis_vectors(direction)
    N = dist.N
    a, b, c = N // 4, N // 3, N // 2
    Xf, Yf = V[a:b], V[a + 1 : b + 1]
    R_hat, *_ = np.linalg.lstsq(Xf, Yf, rcond=None)
    worst = 0.0
    for n in range(b, c + 1):
        num = np.abs(V[n + 1] - V[n] @ R_hat).sum()
        worst = max(worst, float(num / np.abs(V[n + 1]).sum()))
    return GeometricCheck(R_hat, worst, (b, c))
