"""Critical points, Type I/II/III classification, decay rates and exponents.

Everything is on log scale: ``theta1`` is ``log z`` for the x1 direction.
Index-2 quantities are the index-1 quantities of the swapped model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from .exceptions import DomainError, ModelError, QBDError
from .model import ModelSpec, require_valid
from .matrix_eq import g1_eigensystem, solve_G1
from . import drift, spectral

TYPE_TOL = 1e-9
PSI_RTOL = 1e-8
PSI_SLACK = 1e-9
L_FLAG = "l unresolved, default 1"


def _psi_from_G(model, z, G):
    return spectral.perron(model.laurent.C1_mat(z, G)).rho


def psi1(model: ModelSpec, z: float) -> float:
    """``spr C1(z, G1(z))``."""
    return _psi_from_G(model, z, solve_G1(model, z).M)


def psi2(model: ModelSpec, w: float) -> float:
    """``spr C2(G2(w), w)``."""
    return psi1(model.swapped(), w)


def three_way(x: float, ref: float = 1.0, rtol: float | None = None) -> int:
    rtol = PSI_RTOL if rtol is None else rtol
    if abs(x - ref) <= rtol * abs(ref):
        return 0
    return 1 if x > ref else -1


@dataclass(frozen=True)
class CriticalPoints:
    theta1_c: float
    theta2_c: float
    theta2_bar_c: float
    eta1_c: float
    eta2_c: float
    eta1_bar_c: float
    psi1_at_z1max: float
    psi2_at_z2max: float
    z1_max: float = math.nan
    z2_max: float = math.nan

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _axis_critical(model: ModelSpec, z_max: float) -> Tuple[float, float, float, float, List[str]]:
    """``(theta1, theta2, theta2_bar, psi1(z_max), warnings)`` for one model."""
    warnings = []
    s_max = math.log(z_max)
    lpsi = lambda s: math.log(psi1(model, math.exp(s)))
    p_max = psi1(model, z_max)
    if three_way(p_max) > 0:
        p0 = psi1(model, 1.0)
        if p0 > 1.0 + PSI_SLACK:
            raise ModelError(f"psi at 1 is {p0:.12g} > 1, inconsistent with stability")
        # log psi is convex with log psi(1) <= 0; the crossing above its minimum is theta1
        res = optimize.minimize_scalar(lpsi, bounds=(0.0, s_max), method="bounded", options={"xatol": 1e-10})
        s_lo = float(res.x) if res.fun < 0 else 0.0
        if lpsi(s_lo) >= 0:
            s_lo = 0.0
            warnings.append("psi1 does not drop below 1 to the right of 0; theta1 taken at 0")
            theta1 = 0.0
        else:
            theta1 = optimize.brentq(lpsi, s_lo, s_max, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    else:
        theta1 = s_max
        if three_way(p_max) == 0 and p_max > 1.0:
            warnings.append("psi at the extreme point is within tolerance of 1 from above")
    if theta1 >= s_max:
        t, _ = spectral.argmin_w(model, z_max)
        return s_max, t, t, p_max, warnings
    pair = spectral.zeta2(model, math.exp(theta1))
    return theta1, math.log(pair.lower), math.log(pair.upper), p_max, warnings


def critical_points(model: ModelSpec, geometry=None, check_stability: bool = True) -> CriticalPoints:
    cp, _ = critical_points_with_warnings(model, geometry, check_stability)
    return cp


def critical_points_with_warnings(model, geometry=None, check_stability=True):
    if check_stability:
        rep = drift.classify_stability(model)
        if rep.classification != drift.POSITIVE_RECURRENT:
            raise DomainError(f"model is {rep.classification}; decay analysis needs positive recurrence")
    g = geometry or spectral.extreme_points(model)
    g.require_nondegenerate()
    th1, th2, th2b, p1, w1 = _axis_critical(model, g.z1_max)
    et2, et1, et1b, p2, w2 = _axis_critical(model.swapped(), g.z2_max)
    cp = CriticalPoints(th1, th2, th2b, et1, et2, et1b, p1, p2, g.z1_max, g.z2_max)
    return cp, w1 + [w.replace("psi1", "psi2").replace("theta1", "eta2") for w in w2]


def _cmp(a, b, tol=None) -> int:
    tol = TYPE_TOL if tol is None else tol
    if abs(a - b) <= tol:
        return 0
    return -1 if a < b else 1


def classify_type_with_warnings(points: CriticalPoints) -> Tuple[str, List[str]]:
    c1 = _cmp(points.eta1_c, points.theta1_c)  # -1: eta1 < theta1
    c2 = _cmp(points.theta2_c, points.eta2_c)  # -1: theta2 < eta2
    if c1 == 0 and c2 == 0:
        return "II", ["doubly tied corner theta = eta; reported as Type II"]
    if c1 < 0 and c2 < 0:
        return "I", []
    if c1 < 0 and c2 >= 0:
        return "II", []
    if c1 >= 0 and c2 < 0:
        return "III", []
    return "II", ["critical points outside the Type table; reported as Type II"]


def classify_type(points: CriticalPoints) -> str:
    return classify_type_with_warnings(points)[0]


def decay_rates(points: CriticalPoints, type_class: str) -> Tuple[float, float]:
    xi = {
        "I": (points.theta1_c, points.eta2_c),
        "II": (points.eta1_bar_c, points.eta2_c),
        "III": (points.theta1_c, points.theta2_bar_c),
    }[type_class]
    return math.exp(xi[0]), math.exp(xi[1])


# -- exponent table ---------------------------------------------------------------

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class AxisExponent:
    base: str  # "r" or "z_max"
    alpha: Fraction
    label: str
    l_unresolved: bool = False


def _type1_axis(psi_sign: int, idx: int) -> AxisExponent:
    if psi_sign > 0:
        return AxisExponent("r", Fraction(1), f"psi{idx}(z{idx}_max) > 1")
    if psi_sign == 0:
        return AxisExponent("z_max", HALF, f"psi{idx}(z{idx}_max) = 1")
    # (1 - 2 l) / 2 with l = 1
    return AxisExponent("z_max", Fraction(-1, 2), f"psi{idx}(z{idx}_max) < 1", True)


def _tied_axis(tie_sign: int, psi_sign: int, idx: int, tie_label: str) -> AxisExponent:
    if tie_sign < 0:
        return AxisExponent("r", Fraction(1), tie_label.replace("?", "<"))
    eq = tie_label.replace("?", "=")
    if psi_sign > 0:
        return AxisExponent("r", Fraction(2), f"{eq}, psi{idx}(z{idx}_max) > 1")
    if psi_sign == 0:
        return AxisExponent("z_max", Fraction(1), f"{eq}, psi{idx}(z{idx}_max) = 1")
    return AxisExponent("z_max", HALF, f"{eq}, psi{idx}(z{idx}_max) < 1")


def exponent_table(type_class: str, psi1_sign: int, psi2_sign: int, tie_sign: int) -> Tuple[AxisExponent, AxisExponent]:
    """Asymptotic form of both boundary tails.

    ``tie_sign`` is the sign of ``eta2 - theta2`` for Type II and of
    ``theta1 - eta1`` for Type III; it is ignored for Type I.
    """
    if type_class == "I":
        return _type1_axis(psi1_sign, 1), _type1_axis(psi2_sign, 2)
    if type_class == "II":
        return _tied_axis(tie_sign, psi1_sign, 1, "eta2 ? theta2"), AxisExponent("r", Fraction(1), "h2 geometric")
    if type_class == "III":
        return AxisExponent("r", Fraction(1), "h1 geometric"), _tied_axis(tie_sign, psi2_sign, 2, "theta1 ? eta1")
    raise ValueError(f"unknown type {type_class!r}")


@dataclass
class DecayReport:
    type_class: str
    r1: float
    r2: float
    alpha1: Fraction
    alpha2: Fraction
    base1: float
    base2: float
    l_flag1: Optional[str]
    l_flag2: Optional[str]
    prefactor_dir1: Optional[np.ndarray]
    prefactor_dir2: Optional[np.ndarray]
    subcase: str
    warnings: List[str] = field(default_factory=list)
    points: Optional[CriticalPoints] = None

    def to_dict(self) -> dict:
        vec = lambda v: None if v is None else [float(x) for x in v]
        return {
            "type_class": self.type_class,
            "r1": self.r1,
            "r2": self.r2,
            "alpha1": str(self.alpha1),
            "alpha2": str(self.alpha2),
            "alpha1_value": float(self.alpha1),
            "alpha2_value": float(self.alpha2),
            "h1_base": self.base1,
            "h2_base": self.base2,
            "l_flag1": self.l_flag1,
            "l_flag2": self.l_flag2,
            "prefactor_dir1": vec(self.prefactor_dir1),
            "prefactor_dir2": vec(self.prefactor_dir2),
            "subcase": self.subcase,
            "warnings": list(self.warnings),
            "critical_points": None if self.points is None else self.points.to_dict(),
        }


def _tie_sign(type_class, points):
    if type_class == "II":
        return _cmp(points.eta2_c, points.theta2_c)
    if type_class == "III":
        return _cmp(points.theta1_c, points.eta1_c)
    return 0


def exponents(model: ModelSpec, points: CriticalPoints, type_class: str, with_prefactors: bool = True) -> DecayReport:
    r1, r2 = decay_rates(points, type_class)
    warnings = []
    s1, s2 = three_way(points.psi1_at_z1max), three_way(points.psi2_at_z2max)
    tie = _tie_sign(type_class, points)
    e1, e2 = exponent_table(type_class, s1, s2, tie)
    for idx, val, sign in ((1, points.psi1_at_z1max, s1), (2, points.psi2_at_z2max, s2)):
        if sign == 0 and val != 1.0:
            alt = exponent_table(type_class, int(np.sign(val - 1.0)), s2, tie) if idx == 1 else exponent_table(type_class, s1, int(np.sign(val - 1.0)), tie)
            warnings.append(
                f"psi{idx}(z{idx}_max) = {val:.12g} lies inside the equality band; "
                f"neighboring subcase: {alt[idx - 1].label}"
            )
    base = lambda e, r, zm: r if e.base == "r" else zm
    b1 = base(e1, r1, points.z1_max)
    b2 = base(e2, r2, points.z2_max)
    d1 = d2 = None
    if with_prefactors:
        d1, m1 = prefactor_direction(model, 1, type_class, r1, e1)
        d2, m2 = prefactor_direction(model, 2, type_class, r2, e2)
        warnings += [m for m in (m1, m2) if m]
    subcase = f"Type {type_class}: h1 [{e1.label}], h2 [{e2.label}]"
    return DecayReport(
        type_class,
        r1,
        r2,
        e1.alpha,
        e2.alpha,
        b1,
        b2,
        L_FLAG if e1.l_unresolved else None,
        L_FLAG if e2.l_unresolved else None,
        d1,
        d2,
        subcase,
        warnings,
        points,
    )


def prefactor_direction(model: ModelSpec, axis: int, type_class: str, r: float, axis_exp: AxisExponent):
    """Left Perron vector of ``C1(r1, G1(r1))`` (axis 2: of the swapped model).

    Only defined when the dominant singularity of the boundary generating
    function is a simple pole at ``r``.  Returns ``(vector or None, message)``.
    """
    pole = axis_exp.base == "r" and axis_exp.alpha == 1 and (
        type_class == "I" or (type_class, axis) in (("III", 1), ("II", 2))
    )
    if not pole:
        return None, f"axis {axis}: no pole at r{axis} in this subcase; prefactor direction undefined"
    m = model if axis == 1 else model.swapped()
    G = solve_G1(m, r).M
    u = spectral.perron(m.laurent.C1_mat(r, G)).u
    return u / u.sum(), None


def analyze(model: ModelSpec, geometry=None) -> DecayReport:
    """Full decay pipeline: points, type, rates, exponents and directions."""
    require_valid(model)
    g = geometry or spectral.extreme_points(model)
    cp, warn = critical_points_with_warnings(model, g)
    tc, tw = classify_type_with_warnings(cp)
    rep = exponents(model, cp, tc)
    rep.warnings = warn + tw + rep.warnings
    try:
        eig = g1_eigensystem(model, rep.r1)
        if not eig.distinct:
            rep.warnings.append(
                f"eigenvalues of G1(r1) are not distinct (gap {eig.min_gap:.3e}); exponent claims may not hold"
            )
    except QBDError as exc:
        rep.warnings.append(f"eigen-probe of G1(r1) failed: {exc}")
    return rep
