"""Block specification of a discrete-time 2D-QBD process.

A state is ``(x1, x2, j)`` with levels ``x1, x2 >= 0`` and phase ``j``.
Transitions are governed by four families of ``s0 x s0`` nonnegative
blocks keyed by the level increment ``(d1, d2)``:

* ``A``  -- interior (``x1 > 0, x2 > 0``), ``d1, d2`` in {-1, 0, 1}
* ``A1`` -- the x1-axis (``x1 > 0, x2 = 0``), ``d1`` in {-1, 0, 1}, ``d2`` in {0, 1}
* ``A2`` -- the x2-axis (``x1 = 0, x2 > 0``), ``d1`` in {0, 1}, ``d2`` in {-1, 0, 1}
* ``A0`` -- the origin, ``d1, d2`` in {0, 1}

Models are immutable; block arrays are flagged read-only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .exceptions import ModelError

H = (-1, 0, 1)
H_PLUS = (0, 1)

Key = Tuple[int, int]
Blocks = Dict[Key, np.ndarray]

FAMILIES = {
    "A": (H, H),
    "A1": (H, H_PLUS),
    "A2": (H_PLUS, H),
    "A0": (H_PLUS, H_PLUS),
}

STOCHASTIC_TOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _full_family(blocks, family: str, s0: int) -> Blocks:
    ri, rj = FAMILIES[family]
    out = {}
    for i in ri:
        for j in rj:
            m = blocks.get((i, j)) if blocks else None
            m = np.zeros((s0, s0)) if m is None else np.asarray(m, dtype=float)
            if m.shape != (s0, s0):
                raise ModelError(
                    f"dimension mismatch: {family}[{i},{j}] has shape {m.shape}, expected {(s0, s0)}"
                )
            if np.any(m < 0):
                raise ModelError(f"negative entry in {family}[{i},{j}]")
            if not np.all(np.isfinite(m)):
                raise ModelError(f"non-finite entry in {family}[{i},{j}]")
            out[(i, j)] = _freeze(m)
    if blocks:
        extra = set(blocks) - set(out)
        if extra:
            raise ModelError(f"illegal index {sorted(extra)[0]} for family {family}")
    return out


@dataclass(frozen=True)
class ModelSpec:
    """The 25 transition blocks of a 2D-QBD process.

    Construct with partial dictionaries; absent blocks become zero.
    """

    s0: int
    A: Blocks
    A1: Blocks = field(default_factory=dict)
    A2: Blocks = field(default_factory=dict)
    A0: Blocks = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.s0, (int, np.integer)) or self.s0 < 1:
            raise ModelError(f"s0 must be a positive integer, got {self.s0!r}")
        for name in FAMILIES:
            object.__setattr__(self, name, _full_family(getattr(self, name), name, int(self.s0)))

    # -- block sums -------------------------------------------------------

    def family_sum(self, family: str) -> np.ndarray:
        return sum(getattr(self, family).values())

    @property
    def A_star(self) -> np.ndarray:
        """Interior phase transition matrix, the sum of all interior blocks."""
        return self.family_sum("A")

    @property
    def laurent(self) -> "Laurent":
        return Laurent(self)

    def swapped(self) -> "ModelSpec":
        """Model with the two level coordinates exchanged.

        Every index-2 quantity of ``self`` is the index-1 quantity of the
        swapped model, e.g. ``G2(w) == swapped().G1(w)``.
        """
        flip = lambda blocks: {(j, i): m for (i, j), m in blocks.items()}
        return ModelSpec(self.s0, flip(self.A), flip(self.A2), flip(self.A1), flip(self.A0))

    def permuted(self, perm) -> "ModelSpec":
        """Relabel phases: new phase ``k`` is old phase ``perm[k]``."""
        p = np.asarray(perm)
        f = lambda blocks: {k: m[np.ix_(p, p)] for k, m in blocks.items()}
        return ModelSpec(self.s0, f(self.A), f(self.A1), f(self.A2), f(self.A0))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {"s0": int(self.s0)}
        for name in FAMILIES:
            out[name] = {
                f"{i},{j}": m.tolist() for (i, j), m in getattr(self, name).items() if np.any(m)
            }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        if not isinstance(data, dict) or "s0" not in data:
            raise ModelError("model must be a JSON object with an 's0' field")
        s0 = data["s0"]
        if not isinstance(s0, int) or isinstance(s0, bool):
            raise ModelError("'s0' must be an integer")
        fams = {}
        for name in FAMILIES:
            raw = data.get(name, {}) or {}
            if not isinstance(raw, dict):
                raise ModelError(f"family {name} must be an object keyed by 'i,j'")
            blocks = {}
            for key, mat in raw.items():
                try:
                    i, j = (int(t) for t in key.split(","))
                except ValueError:
                    raise ModelError(f"bad block key {key!r} in {name}") from None
                try:
                    arr = np.array(mat, dtype=float)
                except (TypeError, ValueError):
                    raise ModelError(f"block {name}[{key}] is not a numeric matrix") from None
                if arr.ndim != 2:
                    raise ModelError(f"dimension mismatch: block {name}[{key}] is not a matrix")
                blocks[(i, j)] = arr
            fams[name] = blocks
        unknown = set(data) - set(FAMILIES) - {"s0", "name", "description"}
        if unknown:
            raise ModelError(f"unknown top-level field {sorted(unknown)[0]!r}")
        return cls(s0, fams["A"], fams["A1"], fams["A2"], fams["A0"])


def load_model(path) -> ModelSpec:
    """Read a model from the JSON schema documented in the README."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"parse error: {exc}") from exc
    return ModelSpec.from_dict(data)


def dumps_model(model: ModelSpec) -> str:
    """JSON text with one block per line; floats use their shortest repr."""
    d = model.to_dict()
    lines = ["{", f'  "s0": {d["s0"]},']
    fams = list(FAMILIES)
    for n, name in enumerate(fams):
        items = [f'    "{k}": {json.dumps(v)}' for k, v in d[name].items()]
        body = ",\n".join(items)
        tail = "," if n < len(fams) - 1 else ""
        lines.append(f'  "{name}": {{\n{body}\n  }}{tail}' if items else f'  "{name}": {{}}{tail}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def save_model(model: ModelSpec, path) -> None:
    Path(path).write_text(dumps_model(model))


def reflecting_model(A: Blocks, s0: int | None = None) -> ModelSpec:
    """Build boundary blocks by folding blocked moves into staying put.

    On the x1-axis a step with ``d2 = -1`` keeps ``x2 = 0``; on the x2-axis
    ``d1 = -1`` keeps ``x1 = 0``; at the origin both fold.  The result is
    stochastic whenever the interior blocks are.
    """
    if s0 is None:
        s0 = np.asarray(next(iter(A.values()))).shape[0]
    Z = np.zeros((s0, s0))
    get = lambda i, j: np.asarray(A.get((i, j), Z), dtype=float)
    A1 = {(i, 0): get(i, 0) + get(i, -1) for i in H}
    A1.update({(i, 1): get(i, 1) for i in H})
    A2 = {(0, j): get(0, j) + get(-1, j) for j in H}
    A2.update({(1, j): get(1, j) for j in H})
    A0 = {
        (0, 0): get(0, 0) + get(-1, 0) + get(0, -1) + get(-1, -1),
        (1, 0): get(1, 0) + get(1, -1),
        (0, 1): get(0, 1) + get(-1, 1),
        (1, 1): get(1, 1),
    }
    return ModelSpec(s0, dict(A), A1, A2, A0)


# -- Laurent polynomial evaluators -------------------------------------------


def _check_nonzero(*args):
    for a in args:
        if a == 0:
            raise ValueError("zero argument: Laurent polynomials are undefined at 0")


@dataclass(frozen=True)
class Laurent:
    """Matrix Laurent polynomials built from the blocks of one model.

    Naming: ``x2_step(k, z)`` sums the interior blocks with x2-increment
    ``k`` weighted by ``z**d1``; ``x1_step(k, w)`` sums those with
    x1-increment ``k`` weighted by ``w**d2``.
    """

    model: ModelSpec

    def C(self, z, w):
        _check_nonzero(z, w)
        return sum(m * (z**i) * (w**j) for (i, j), m in self.model.A.items())

    def C0(self, z, w):
        return sum(m * (z**i) * (w**j) for (i, j), m in self.model.A0.items())

    def C1(self, z, w):
        _check_nonzero(z)
        return sum(m * (z**i) * (w**j) for (i, j), m in self.model.A1.items())

    def C2(self, z, w):
        _check_nonzero(w)
        return sum(m * (z**i) * (w**j) for (i, j), m in self.model.A2.items())

    def x2_step(self, k: int, z):
        _check_nonzero(z)
        return sum(self.model.A[(i, k)] * z**i for i in H)

    def x1_step(self, k: int, w):
        _check_nonzero(w)
        return sum(self.model.A[(k, j)] * w**j for j in H)

    def axis1_x2_step(self, k: int, z):
        """Sum over ``d1`` of x1-axis blocks with x2-increment ``k`` (0 or 1)."""
        _check_nonzero(z)
        return sum(self.model.A1[(i, k)] * z**i for i in H)

    def axis2_x1_step(self, k: int, w):
        """Sum over ``d2`` of x2-axis blocks with x1-increment ``k`` (0 or 1)."""
        _check_nonzero(w)
        return sum(self.model.A2[(k, j)] * w**j for j in H)

    def axis2_x2_step(self, k: int, z):
        """Sum over ``d1`` in {0, 1} of x2-axis blocks with x2-increment ``k``."""
        return sum(self.model.A2[(i, k)] * z**i for i in H_PLUS)

    def origin_x2_step(self, k: int, z):
        return sum(self.model.A0[(i, k)] * z**i for i in H_PLUS)

    # matrix-argument versions: the second level variable becomes a matrix X

    def C1_mat(self, z, X):
        return self.axis1_x2_step(0, z) + self.axis1_x2_step(1, z) @ X

    def C0_mat(self, z, X):
        return self.origin_x2_step(0, z) + self.origin_x2_step(1, z) @ X

    def C_hat(self, z, X):
        return self.x2_step(-1, z) + self.x2_step(0, z) @ X + self.x2_step(1, z) @ X @ X

    def C2_hat(self, z, X):
        return (
            self.axis2_x2_step(-1, z)
            + self.axis2_x2_step(0, z) @ X
            + self.axis2_x2_step(1, z) @ X @ X
        )

    def L(self, z, w):
        """``z w (C(z, w) - I)``, a matrix polynomial of degree two in ``w``."""
        I = np.eye(self.model.s0)
        return z * self.x2_step(-1, z) + z * (self.x2_step(0, z) - I) * w + z * self.x2_step(1, z) * w**2


def eval_C(model: ModelSpec, z, w) -> np.ndarray:
    return model.laurent.C(z, w)


# -- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    stochasticity_ok: bool
    irreducibility_checks: List[Tuple[str, str]]
    distinct_eigenvalue_check: str
    messages: List[str]

    @property
    def ok(self) -> bool:
        return self.stochasticity_ok and all(s != "fail" for _, s in self.irreducibility_checks)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "stochasticity_ok": self.stochasticity_ok,
            "irreducibility_checks": [list(c) for c in self.irreducibility_checks],
            "distinct_eigenvalue_check": self.distinct_eigenvalue_check,
            "messages": list(self.messages),
        }


def _graph_period(adj: np.ndarray) -> Tuple[bool, int]:
    """Return (strongly connected, period) of the digraph ``adj > 0``."""
    n = adj.shape[0]
    succ = [np.flatnonzero(adj[i] > 0) for i in range(n)]
    pred = [np.flatnonzero(adj[:, i] > 0) for i in range(n)]

    def reach(nbrs):
        seen = {0}
        stack = [0]
        level = {0: 0}
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    level[v] = level[u] + 1
                    stack.append(v)
        return seen, level

    fwd, _ = reach(succ)
    bwd, _ = reach(pred)
    if len(fwd) < n or len(bwd) < n:
        return False, 0
    # period = gcd over edges (u, v) of level[u] + 1 - level[v], with BFS levels
    from collections import deque

    level = {0: 0}
    q = deque([0])
    while q:
        u = q.popleft()
        for v in succ[u]:
            if v not in level:
                level[v] = level[u] + 1
                q.append(v)
    g = 0
    for u in range(n):
        for v in succ[u]:
            g = math.gcd(g, abs(level[u] + 1 - level[v]))
    return True, g


def _irreducible_aperiodic(adj: np.ndarray) -> Tuple[bool, bool]:
    conn, period = _graph_period(adj)
    return conn, conn and period == 1


def _truncated_boundary_qbd(model: ModelSpec, levels: int) -> np.ndarray:
    """Level-truncated generator of the x2-level process driven by the x1-axis."""
    s0 = model.s0
    lau = model.laurent
    n = (levels + 1) * s0
    P = np.zeros((n, n))
    blk = lambda a, b: (slice(a * s0, (a + 1) * s0), slice(b * s0, (b + 1) * s0))
    down, loc, up = (lau.x2_step(k, 1.0) for k in H)
    P[blk(0, 0)] = lau.axis1_x2_step(0, 1.0)
    if levels >= 1:
        P[blk(0, 1)] = lau.axis1_x2_step(1, 1.0)
    for k in range(1, levels + 1):
        P[blk(k, k - 1)] = down
        P[blk(k, k)] = loc
        if k < levels:
            P[blk(k, k + 1)] = up
    return P


def validate(model: ModelSpec, level_cap: int = 5, gap_tol: float | None = None) -> ValidationReport:
    messages = []
    stoch_ok = True
    for name in FAMILIES:
        rows = model.family_sum(name).sum(axis=1)
        dev = float(np.max(np.abs(rows - 1.0)))
        if dev > STOCHASTIC_TOL:
            stoch_ok = False
            messages.append(f"{name} blocks do not sum to a stochastic matrix (max row deviation {dev:.3e})")

    checks = []
    irr, aper = _irreducible_aperiodic(model.A_star)
    checks.append(("A_star_irreducible", "pass" if irr else "fail"))
    checks.append(("A_star_aperiodic", "pass" if aper else "fail"))
    if irr and not aper:
        messages.append("interior phase matrix is periodic")
    for label, m in (("axis1", model), ("axis2", model.swapped())):
        P = _truncated_boundary_qbd(m, level_cap)
        irr_b, aper_b = _irreducible_aperiodic(P)
        checks.append((f"{label}_boundary_qbd_irreducible_aperiodic", "pass" if aper_b else "fail"))
    checks.append(("lattice_irreducible", "indeterminate"))
    messages.append(
        "irreducibility of the full lattice chain is not certified by finite checks; "
        "only necessary conditions were verified"
    )

    distinct = "indeterminate"
    if stoch_ok and irr:
        from .matrix_eq import g1_eigensystem  # deferred: matrix_eq imports this module

        try:
            eig = g1_eigensystem(model, 1.0)
            if gap_tol is not None:
                ok = model.s0 == 1 or eig.min_gap > gap_tol * max(eig.spectral_radius, 1e-300)
            else:
                ok = eig.distinct
            distinct = "pass" if ok else "fail"
            if distinct == "fail":
                messages.append(f"G1(1) has nearly repeated eigenvalues (gap {eig.min_gap:.3e})")
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            distinct = "fail"
            messages.append(f"G1(1) eigen-probe failed: {exc}")
    return ValidationReport(stoch_ok, checks, distinct, messages)


def require_valid(model: ModelSpec) -> None:
    rep = validate(model)
    if not rep.stochasticity_ok:
        raise ModelError("; ".join(rep.messages) or "model failed validation")
