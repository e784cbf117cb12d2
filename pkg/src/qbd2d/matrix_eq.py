"""Minimal nonnegative solutions of the parametrized matrix quadratics.

All four equations reduce to one kernel: the minimal nonnegative ``X`` with
``X = down + local X + up X^2``.  ``G1(z)`` uses the x2-step blocks of the
interior at ``z``; ``R1(z)`` is the transpose of the kernel applied to the
transposed blocks in reverse order; index 2 runs on the swapped model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from .exceptions import ConvergenceError, DegenerateGeometryError, DomainError, QBDError
from .model import ModelSpec
from . import spectral

FUNCTIONAL_TOL = 1e-13
RESIDUAL_TOL = 1e-12
MAX_ITER = 1_000_000
AUTO_FUNCTIONAL_CAP = 2000
CR_MAX_STEPS = 200
DOMAIN_SLACK = 1e-12
GAP_TOL = 1e-9


@dataclass(frozen=True)
class MatrixSolution:
    z: float
    M: np.ndarray
    residual: float
    iterations: int
    kind: str
    method: str = "functional"

    def to_dict(self):
        return {
            "z": self.z,
            "kind": self.kind,
            "matrix": self.M.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
        }


def quadratic_residual(X, down, local, up) -> float:
    return float(np.max(np.abs(X - (down + local @ X + up @ X @ X))))


def functional_iterates(down, local, up, X0=None) -> Iterator[np.ndarray]:
    """Iterates of ``X <- down + local X + up X^2`` from ``X0 = 0``.

    Starting from zero the sequence is entrywise nondecreasing and converges
    to the minimal nonnegative solution.
    """
    X = np.zeros_like(down) if X0 is None else X0
    while True:
        X = down + local @ X + up @ X @ X
        yield X


def _functional(down, local, up, tol, max_iter):
    X = np.zeros_like(down)
    for it in range(1, max_iter + 1):
        Xn = down + local @ X + up @ X @ X
        inc = float(np.max(np.abs(Xn - X)))
        X = Xn
        if inc <= tol:
            return X, it
        if it % 64 == 0 and quadratic_residual(X, down, local, up) <= min(tol, RESIDUAL_TOL) * 1e-2:
            return X, it
    raise ConvergenceError(
        f"functional iteration hit max_iter={max_iter}",
        partial=X,
        residual=quadratic_residual(X, down, local, up),
    )


def _cyclic_reduction(down, local, up, max_steps=CR_MAX_STEPS):
    """Cyclic reduction for the minimal solution of the G-type equation.

    Uses the equivalent form ``0 = down + (local - I) X + up X^2``.  Each
    step is rescaled by ``s`` (``down/s``, ``up*s``), an exact symmetry of the
    recurrence that keeps the top and bottom blocks balanced.
    """
    n = down.shape[0]
    I = np.eye(n)
    Bm, B0, Bp = down.copy(), local.copy(), up.copy()
    B0_hat = local.copy()
    for step in range(1, max_steps + 1):
        K = linalg.solve(I - B0, np.hstack([Bm, Bp]))
        KBm, KBp = K[:, :n], K[:, n:]
        B0_hat = B0_hat + Bp @ KBm
        B0 = B0 + Bm @ KBp + Bp @ KBm
        Bm, Bp = Bm @ KBm, Bp @ KBp
        nm, np_ = np.max(np.abs(Bm)), np.max(np.abs(Bp))
        if nm * np_ * np.max(np.abs(K)) < 1e-20:
            break
        lam = math.sqrt(nm / np_)
        Bm, Bp = Bm / lam, Bp * lam
    X = linalg.solve(I - B0_hat, down)
    return X, step


def _newton_polish(X, down, local, up, steps=3):
    """A few Newton steps on ``F(X) = down + local X + up X^2 - X``."""
    n = X.shape[0]
    I = np.eye(n)
    best = X
    best_res = quadratic_residual(X, down, local, up)
    for _ in range(steps):
        F = down + local @ X + up @ X @ X - X
        # derivative: dX -> (local + up X - I) dX + up dX X
        J = np.kron(I, local + up @ X - I) + np.kron(X.T, up)
        try:
            d = linalg.solve(J, -F.reshape(-1, order="F"))
        except (linalg.LinAlgError, ValueError):
            break
        Xn = np.maximum(X + d.reshape((n, n), order="F"), 0.0)
        r = quadratic_residual(Xn, down, local, up)
        if not np.isfinite(r) or r >= best_res:
            break
        X, best, best_res = Xn, Xn, r
    return best, best_res


def minimal_solution(down, local, up, tol=None, max_iter=None, method="auto"):
    """Minimal nonnegative solution of ``X = down + local X + up X^2``.

    ``method`` is ``functional`` (monotone iteration from zero), ``cr``
    (cyclic reduction followed by a Newton polish), or ``auto``: functional
    iteration for a short budget, then cyclic reduction.
    Returns ``(X, residual, iterations, method_used)``.
    """
    tol = FUNCTIONAL_TOL if tol is None else tol
    max_iter = MAX_ITER if max_iter is None else max_iter
    if method == "functional":
        X, it = _functional(down, local, up, tol, max_iter)
        return X, quadratic_residual(X, down, local, up), it, "functional"
    if method == "auto":
        try:
            X, it = _functional(down, local, up, tol, min(max_iter, AUTO_FUNCTIONAL_CAP))
            res = quadratic_residual(X, down, local, up)
            if res <= RESIDUAL_TOL:
                return X, res, it, "functional"
        except ConvergenceError:
            pass
    elif method != "cr":
        raise ValueError(f"unknown method {method!r}")
    X, it = _cyclic_reduction(down, local, up)
    X = np.maximum(X, 0.0)
    X, res = _newton_polish(X, down, local, up)
    if not np.isfinite(res) or res > max(RESIDUAL_TOL, 100 * tol):
        raise ConvergenceError("cyclic reduction did not reach the residual tolerance", partial=X, residual=res)
    return X, res, it, "cr"


def _check_domain(model: ModelSpec, z: float):
    if z <= 0:
        raise DomainError("parameter must be positive")
    if spectral.m1(model, z) > 1.0 + DOMAIN_SLACK:
        raise DomainError(
            f"z={z} lies outside [z1_min, z1_max]: no nonnegative solution exists"
        )


def _g_blocks(model: ModelSpec, z):
    lau = model.laurent
    return lau.x2_step(-1, z), lau.x2_step(0, z), lau.x2_step(1, z)


def solve_G1(model, z, tol=None, max_iter=None, method="auto", check_domain=True) -> MatrixSolution:
    if check_domain:
        _check_domain(model, z)
    X, res, it, used = minimal_solution(*_g_blocks(model, z), tol=tol, max_iter=max_iter, method=method)
    return MatrixSolution(float(z), X, res, it, "G1", used)


def solve_R1(model, z, tol=None, max_iter=None, method="auto", check_domain=True) -> MatrixSolution:
    """Minimal nonnegative solution of ``X = X^2 A_{*,-1}(z) + X A_{*,0}(z) + A_{*,1}(z)``."""
    if check_domain:
        _check_domain(model, z)
    down, local, up = _g_blocks(model, z)
    Xt, _, it, used = minimal_solution(up.T, local.T, down.T, tol=tol, max_iter=max_iter, method=method)
    X = Xt.T
    res = float(np.max(np.abs(X - (X @ X @ down + X @ local + up))))
    return MatrixSolution(float(z), X, res, it, "R1", used)


def solve_G2(model, w, **kw) -> MatrixSolution:
    s = solve_G1(model.swapped(), w, **kw)
    return MatrixSolution(s.z, s.M, s.residual, s.iterations, "G2", s.method)


def solve_R2(model, w, **kw) -> MatrixSolution:
    s = solve_R1(model.swapped(), w, **kw)
    return MatrixSolution(s.z, s.M, s.residual, s.iterations, "R2", s.method)


SOLVERS = {"G1": solve_G1, "R1": solve_R1, "G2": solve_G2, "R2": solve_R2}


def solve(model, z, kind: str, **kw) -> MatrixSolution:
    try:
        return SOLVERS[kind](model, z, **kw)
    except KeyError:
        raise ValueError(f"unknown kind {kind!r}; expected one of {sorted(SOLVERS)}") from None


# -- H, N and the factorization of I - C(z, w) ---------------------------------


@dataclass(frozen=True)
class FactorizationBundle:
    z: float
    G1: np.ndarray
    R1: np.ndarray
    H1: np.ndarray
    N1: np.ndarray
    factorization_residual_max: float
    N_inverse_residual: float
    H_residual: float
    G_from_N_residual: float
    R_from_N_residual: float


def factorization_bundle(model: ModelSpec, z: float, w_grid: Sequence[float] = (0.5, 1.0, 1.5)) -> FactorizationBundle:
    down, local, up = _g_blocks(model, z)
    G = solve_G1(model, z).M
    R = solve_R1(model, z, check_domain=False).M
    I = np.eye(model.s0)
    H1 = local + up @ G
    try:
        N1 = linalg.inv(I - H1)
    except linalg.LinAlgError as exc:
        raise QBDError("I - H1 is singular; upstream G1 solve is inaccurate") from exc
    worst = 0.0
    for w in w_grid:
        if w == 0:
            raise ValueError("w grid must avoid zero")
        lhs = I - model.laurent.C(z, w)
        rhs = (I / w - R) @ (I - H1) @ (w * I - G)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return FactorizationBundle(
        float(z),
        G,
        R,
        H1,
        N1,
        worst,
        float(np.max(np.abs(N1 @ (I - H1) - I))),
        float(np.max(np.abs(H1 - (local + up @ G)))),
        float(np.max(np.abs(G - N1 @ down))),
        float(np.max(np.abs(R - up @ N1))),
    )


def factorization_bundle_2(model: ModelSpec, w: float, z_grid: Sequence[float] = (0.5, 1.0, 1.5)) -> FactorizationBundle:
    """Index-2 analogue: ``I - C(z, w) = (z^-1 I - R2)(I - H2)(z I - G2)``."""
    return factorization_bundle(model.swapped(), w, z_grid)


# -- eigenstructure of G1 -------------------------------------------------------


@dataclass(frozen=True)
class G1Eigensystem:
    z: float
    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    min_gap: float
    spectral_radius: float

    @property
    def distinct(self) -> bool:
        return len(self.eigenvalues) == 1 or self.min_gap > GAP_TOL * max(self.spectral_radius, 1e-300)

    def __iter__(self):
        return iter((self.eigenvalues, self.right_vectors, self.left_vectors))


def _min_pairwise_gap(vals) -> float:
    if len(vals) < 2:
        return math.inf
    d = np.abs(vals[:, None] - vals[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def g1_eigensystem(model: ModelSpec, z: float, G: np.ndarray | None = None) -> G1Eigensystem:
    """Eigenvalues of ``G1(z)`` sorted by modulus, the top one last."""
    if G is None:
        G = solve_G1(model, z).M
    w, vl, vr = linalg.eig(G, left=True, right=True)
    order = np.lexsort((w.real, np.abs(w)))
    w, vl, vr = w[order], vl[:, order], vr[:, order]
    return G1Eigensystem(float(z), w, vr, vl, _min_pairwise_gap(w), float(np.max(np.abs(w))))


def det_L_roots(model: ModelSpec, z: float, radius: float = 1.0) -> np.ndarray:
    """Roots in w of ``det L(z, w)``, independent of any G solve.

    The coefficients of the degree-``2 s0`` polynomial are recovered by
    sampling the determinant on a circle and applying an inverse DFT; the
    roots come from its companion matrix.
    """
    n = 2 * model.s0 + 1
    ws = radius * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([linalg.det(model.laurent.L(z, w)) for w in ws])
    coef = np.fft.fft(vals) / n  # coef[k] multiplies (w / radius)**k
    coef = coef / radius ** np.arange(n)
    coef = coef.real if np.all(np.abs(coef.imag) <= 1e-12 * np.max(np.abs(coef))) else coef
    scale = np.max(np.abs(coef))
    hi = n - 1
    while hi > 0 and abs(coef[hi]) <= 1e-13 * scale:
        hi -= 1
    roots = np.roots(coef[: hi + 1][::-1])
    return roots[np.argsort(np.abs(roots))]


# -- behavior at the extreme point z1_max ------------------------------------------


@dataclass(frozen=True)
class BranchProbe:
    z_star: float
    alpha_at_star: float
    scaling_constant: float
    zeta1_second_derivative: float
    samples: List[Tuple[float, float]]

    def relative_errors(self):
        return [(d, abs(r / self.scaling_constant - 1.0)) for d, r in self.samples]


def top_eigenvalue_G1(model: ModelSpec, z: float) -> float:
    G = solve_G1(model, z, check_domain=False).M
    vals = linalg.eigvals(G)
    return float(np.max(vals.real))


def zeta1_upper_second_derivative(model: ModelSpec, w: float, h: float = 1e-3) -> float:
    """Central second difference of the upper zeta1 branch, one Richardson level."""

    def f(x):
        return spectral.zeta1(model, x).upper

    def d2(step):
        return (f(w + step) - 2.0 * f(w) + f(w - step)) / step**2

    return (4.0 * d2(h / 2) - d2(h)) / 3.0


def branch_probe(model: ModelSpec, deltas=(1e-6, 1e-5, 1e-4), geometry=None) -> BranchProbe:
    g = geometry or spectral.extreme_points(model)
    g.require_nondegenerate()
    z_star = g.z1_max
    t_star, _ = spectral.argmin_w(model, z_star)
    alpha_star = math.exp(t_star)
    d2 = zeta1_upper_second_derivative(model, alpha_star)
    if not d2 < 0:
        raise QBDError(f"second derivative of the upper zeta1 branch is {d2:.3e} >= 0; geometry error")
    const = math.sqrt(2.0 / -d2)
    samples = []
    for d in deltas:
        a = top_eigenvalue_G1(model, z_star - d)
        samples.append((float(d), (alpha_star - a) / math.sqrt(d)))
    return BranchProbe(z_star, alpha_star, const, d2, samples)


@dataclass(frozen=True)
class RankOneProbe:
    delta: float
    matrix_ratio: np.ndarray
    rank_gap: float
    predicted_direction_cosine: float
    min_entry: float

    def __iter__(self):
        return iter((self.matrix_ratio, self.rank_gap))


def rank_one_derivative_probe(model: ModelSpec, delta: float = 1e-6, geometry=None) -> RankOneProbe:
    """Finite-difference scaled derivative of G1 at the extreme point.

    The limit matrix is rank one and proportional to ``N1 v^R u^G`` where
    ``v^R`` is the right Perron vector of ``R1(z*)`` and ``u^G`` the left
    Perron vector of ``G1(z*)``.
    """
    g = geometry or spectral.extreme_points(model)
    g.require_nondegenerate()
    z = g.z1_max
    G_star = solve_G1(model, z, check_domain=False).M
    G_near = solve_G1(model, z - delta, check_domain=False).M
    D = (G_star - G_near) / math.sqrt(delta)
    sv = linalg.svdvals(D)
    gap = float(sv[1] / sv[0]) if len(sv) > 1 and sv[0] > 0 else 0.0
    down, local, up = _g_blocks(model, z)
    N1 = linalg.inv(np.eye(model.s0) - local - up @ G_star)
    R_star = solve_R1(model, z, check_domain=False).M
    vR = spectral.perron(R_star).v
    uG = spectral.perron(G_star).u
    P = np.outer(N1 @ vR, uG)
    cos = float(np.sum(P * D) / (np.linalg.norm(P) * np.linalg.norm(D)))
    if gap > 0.05:
        raise QBDError(f"rank gap {gap:.3e} exceeds 0.05: eigenvalues of G1 may not be distinct or the solve is inaccurate")
    return RankOneProbe(float(delta), D, gap, cos, float(D.min()))
