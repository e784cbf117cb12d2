"""Perron-Frobenius data of C(z, w) and the convex region where it is <= 1.

Everything is parametrized on log scale, ``z = e^s``, ``w = e^t``; on that
scale ``t -> chi(z, e^t)`` is convex, so minima come from the root of the
t-derivative, which we get exactly from the Perron vectors.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np
from scipy import linalg, optimize

from .exceptions import ConvergenceError, DegenerateGeometryError, DomainError
from .model import H, ModelSpec

DENSE_LIMIT = 64
POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000
ROOT_XTOL = 1e-15
COINCIDENT_RTOL = 1e-7
DEGENERATE_TOL = 1e-9
T_LIMIT = 60.0


@dataclass(frozen=True)
class PerronTriple:
    rho: float
    u: np.ndarray
    v: np.ndarray
    residual: float


def _power_iteration(M, tol=None, max_iter=POWER_MAX_ITER):
    tol = POWER_TOL if tol is None else tol
    n = M.shape[0]
    # shifting by I removes periodicity without moving the Perron vector
    S = M + np.eye(n)
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for it in range(max_iter):
        x = S @ v
        new = x.sum()
        x /= new
        if abs(new - lam) <= tol * max(new, 1.0) and np.abs(x - v).sum() <= tol * 10:
            return new - 1.0, x, it
        v, lam = x, new
    raise ConvergenceError("power iteration did not converge", partial=v)


def perron(M: np.ndarray, method: str = "auto") -> PerronTriple:
    """Perron triple of a nonnegative matrix, normalized so that ``u.v = 1``.

    ``v`` sums to one.  Small matrices use a dense eigensolve; larger ones
    use shifted power iteration on ``M`` and ``M.T``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if n == 1:
        return PerronTriple(float(M[0, 0]), np.ones(1), np.ones(1), 0.0)
    if method == "power" or (method == "auto" and n > DENSE_LIMIT):
        rho, v, _ = _power_iteration(M)
        _, u, _ = _power_iteration(M.T)
    else:
        w, vl, vr = linalg.eig(M, left=True, right=True)
        k = int(np.argmax(w.real))
        rho = float(w[k].real)
        v = np.abs(vr[:, k].real)
        u = np.abs(vl[:, k].real)
    v = v / v.sum()
    u = u / (u @ v)
    res = max(np.abs(u @ M - rho * u).sum(), np.abs(M @ v - rho * v).sum())
    return PerronTriple(rho, u, v, float(res))


def spr(M) -> float:
    """Spectral radius of a (possibly complex) square matrix."""
    M = np.asarray(M)
    if M.shape == (1, 1):
        return float(abs(M[0, 0]))
    return float(np.max(np.abs(linalg.eigvals(M))))


def chi(model: ModelSpec, z, w) -> PerronTriple:
    if z <= 0 or w <= 0:
        raise DomainError("chi is evaluated at positive arguments only")
    return perron(model.laurent.C(z, w))


def chi_value(model: ModelSpec, z, w) -> float:
    return perron(model.laurent.C(z, w)).rho


def _dchi_dt(model: ModelSpec, z: float, t: float) -> Tuple[float, float]:
    """``chi(z, e^t)`` and its t-derivative, via the Perron vectors."""
    w = math.exp(t)
    C = model.laurent.C(z, w)
    dC = sum(j * m * (z**i) * (w**j) for (i, j), m in model.A.items())
    p = perron(C)
    return p.rho, float(p.u @ dC @ p.v)


def _convex_argmin(f_and_df: Callable[[float], Tuple[float, float]], x0: float = 0.0):
    """Minimizer of a convex function given value and derivative.

    Brackets the sign change of the derivative by doubling steps, then runs
    brentq.  Raises DomainError when no minimum exists within ``T_LIMIT``.
    """
    d0 = f_and_df(x0)[1]
    if d0 == 0.0:
        return x0
    step = -1.0 if d0 > 0 else 1.0
    a = x0
    b = x0 + step
    while True:
        db = f_and_df(b)[1]
        if np.sign(db) != np.sign(d0):
            break
        if abs(b) > T_LIMIT:
            raise DomainError("function has no minimum: the region chi <= 1 is unbounded")
        a, b = b, b + step
        step *= 2.0
    lo, hi = min(a, b), max(a, b)
    return optimize.brentq(lambda x: f_and_df(x)[1], lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)


def argmin_w(model: ModelSpec, z: float) -> Tuple[float, float]:
    """``(t*, chi(z, e^{t*}))`` with ``t*`` minimizing ``t -> chi(z, e^t)``."""
    t = _convex_argmin(lambda t: _dchi_dt(model, z, t))
    return t, chi_value(model, z, math.exp(t))


def m1(model: ModelSpec, z: float) -> float:
    """``min_t chi(z, e^t)``."""
    return argmin_w(model, z)[1]


@dataclass(frozen=True)
class SpectralGeometry:
    z1_min: float
    z1_max: float
    z2_min: float
    z2_max: float
    tolerance: float = ROOT_XTOL

    @property
    def degenerate(self) -> bool:
        return (self.z1_max - self.z1_min < DEGENERATE_TOL) or (self.z2_max - self.z2_min < DEGENERATE_TOL)

    def require_nondegenerate(self):
        if self.degenerate:
            raise DegenerateGeometryError(
                "degenerate geometry: the region chi <= 1 collapses to the origin"
            )

    def to_dict(self):
        return {
            "z1_min": self.z1_min,
            "z1_max": self.z1_max,
            "z2_min": self.z2_min,
            "z2_max": self.z2_max,
            "degenerate": self.degenerate,
        }


def _axis_extremes(model: ModelSpec) -> Tuple[float, float]:
    def f_and_df(s):
        z = math.exp(s)
        t, val = argmin_w(model, z)
        w = math.exp(t)
        # envelope theorem: d/ds m1(e^s) = d/ds chi(e^s, w) at the fixed minimizer
        dC = sum(i * m * (z**i) * (w**j) for (i, j), m in model.A.items())
        p = perron(model.laurent.C(z, w))
        return val, float(p.u @ dC @ p.v)

    s_min = _convex_argmin(f_and_df)
    g = lambda s: f_and_df(s)[0] - 1.0
    if g(s_min) >= -DEGENERATE_TOL**2:
        z = math.exp(s_min)
        return z, z

    def root(direction):
        a, b = s_min, s_min + direction
        while g(b) <= 0:
            if abs(b) > T_LIMIT:
                raise DomainError("extreme point bracket failure: region looks unbounded")
            a, b = b, b + direction * (abs(b - s_min))
        lo, hi = min(a, b), max(a, b)
        return math.exp(optimize.brentq(g, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps))

    return root(-1.0), root(1.0)


def extreme_points(model: ModelSpec) -> SpectralGeometry:
    lo1, hi1 = _axis_extremes(model)
    lo2, hi2 = _axis_extremes(model.swapped())
    return SpectralGeometry(lo1, hi1, lo2, hi2)


@dataclass(frozen=True)
class ZetaPair:
    lower: float
    upper: float
    coincident: bool


def zeta2(model: ModelSpec, z1: float) -> ZetaPair:
    """The two real roots in w of ``chi(z1, w) = 1``."""
    if z1 <= 0:
        raise DomainError("z1 must be positive")
    t_star, val = argmin_w(model, z1)
    if val > 1.0 + 1e-12:
        raise DomainError(f"z1={z1} lies outside [z1_min, z1_max]: chi(z1, w) = 1 has no real solutions")
    if val >= 1.0:
        w = math.exp(t_star)
        return ZetaPair(w, w, True)
    g = lambda t: chi_value(model, z1, math.exp(t)) - 1.0

    def root(direction):
        step = 1.0
        a, b = t_star, t_star + direction * step
        while g(b) < 0:
            if abs(b) > T_LIMIT:
                raise DomainError("zeta root bracket failure: chi(z1, .) stays below 1")
            step *= 2.0
            a, b = b, t_star + direction * step
        lo, hi = min(a, b), max(a, b)
        return math.exp(optimize.brentq(g, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps))

    lo, hi = root(-1.0), root(1.0)
    return ZetaPair(lo, hi, abs(hi - lo) <= COINCIDENT_RTOL * hi)


def zeta1(model: ModelSpec, z2: float) -> ZetaPair:
    """The two real roots in z of ``chi(z, z2) = 1``."""
    return zeta2(model.swapped(), z2)


def sample_curve(model: ModelSpec, n: int, geometry: SpectralGeometry | None = None):
    """``n`` points ``(s1, log lower, log upper)`` of the boundary of the region."""
    if n < 2:
        raise ValueError("n must be at least 2")
    g = geometry or extreme_points(model)
    if g.z1_max - g.z1_min < DEGENERATE_TOL:
        t, _ = argmin_w(model, g.z1_max)
        s = math.log(g.z1_max)
        return [(s, t, t)]
    out = []
    a, b = math.log(g.z1_min), math.log(g.z1_max)
    for k, s in enumerate(np.linspace(a, b, n)):
        if k in (0, n - 1):
            z = g.z1_min if k == 0 else g.z1_max
            t, _ = argmin_w(model, z)
            out.append((math.log(z), t, t))
            continue
        p = zeta2(model, math.exp(s))
        out.append((float(s), math.log(p.lower), math.log(p.upper)))
    return out


def curve_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s1", "s2_lower", "s2_upper"])
    for row in points:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()
