"""Model builders shared by the test modules."""
from pathlib import Path

import numpy as np

from qbd2d.drift import POSITIVE_RECURRENT, TRANSIENT
from qbd2d.model import ModelSpec, load_model, reflecting_model

FIXTURES = Path(__file__).parent / "fixtures"


def fixture(name: str) -> ModelSpec:
    return load_model(FIXTURES / f"{name}.json")


def scalar_walk(right, left, up, down, A1=None, A2=None):
    """Scalar walk with reflecting boundaries, optionally replacing axis blocks.

    ``A1`` / ``A2`` map ``(i, j)`` to probabilities on the x1 / x2 axis.
    """
    stay = round(1.0 - right - left - up - down, 14)
    base = reflecting_model({(1, 0): [[right]], (-1, 0): [[left]], (0, 1): [[up]], (0, -1): [[down]], (0, 0): [[stay]]})
    A1b = base.A1 if A1 is None else {k: [[v]] for k, v in A1.items()}
    A2b = base.A2 if A2 is None else {k: [[v]] for k, v in A2.items()}
    A0 = base.A0
    if A1 is not None or A2 is not None:
        # origin: right with the x1-axis' rightward mass, up with the x2-axis' upward mass
        r = sum(v for (i, j), v in (A1 or {}).items() if i == 1) if A1 else float(base.A0[(1, 0)][0, 0])
        u = sum(v for (i, j), v in (A2 or {}).items() if j == 1) if A2 else float(base.A0[(0, 1)][0, 0])
        A0 = {(1, 0): [[r]], (0, 1): [[u]], (0, 0): [[1.0 - r - u]]}
    return ModelSpec(1, dict(base.A), A1b, A2b, A0)


def phase_modulated(d0, d1, S=((0.8, 0.2), (0.3, 0.7))):
    """Two-phase walk: phase k moves with probabilities ``dk`` then switches by ``S``."""
    S = np.asarray(S, float)
    A = {key: np.round(np.diag([d0.get(key, 0.0), d1.get(key, 0.0)]) @ S, 12) for key in set(d0) | set(d1)}
    return reflecting_model(A, 2)


PUSH_RIGHT = {(1, 0): 0.6, (0, 1): 0.05, (0, 0): 0.35}
PULL_LEFT = {(-1, 0): 0.6, (1, 0): 0.1, (0, 1): 0.1, (0, 0): 0.2}

NEG_NEG = (0.2, 0.3, 0.2, 0.3)
POS_NEG = (0.3, 0.2, 0.2, 0.3)

# (name, model, expected class); mirrors come from swapping coordinates
SIGN_FIXTURES = {
    "neg_neg_stable": (scalar_walk(*NEG_NEG), POSITIVE_RECURRENT),
    "neg_neg_axis1_escapes": (scalar_walk(*NEG_NEG, A1=PUSH_RIGHT), TRANSIENT),
    "neg_neg_axis2_escapes": (scalar_walk(*NEG_NEG, A1=PUSH_RIGHT).swapped(), TRANSIENT),
    "pos_neg_axis1_holds": (scalar_walk(*POS_NEG, A1=PULL_LEFT), POSITIVE_RECURRENT),
    "pos_neg_axis1_leaks": (scalar_walk(*POS_NEG), TRANSIENT),
    "neg_pos_axis2_holds": (scalar_walk(*POS_NEG, A1=PULL_LEFT).swapped(), POSITIVE_RECURRENT),
    "neg_pos_axis2_leaks": (scalar_walk(*POS_NEG).swapped(), TRANSIENT),
    "pos_pos": (scalar_walk(0.3, 0.2, 0.3, 0.2), TRANSIENT),
}
