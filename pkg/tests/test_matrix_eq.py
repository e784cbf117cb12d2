import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbd2d import matrix_eq, spectral
from qbd2d.drift import drift_interior
from qbd2d.exceptions import DomainError
from qbd2d.matrix_eq import (
    branch_probe, det_L_roots, factorization_bundle, factorization_bundle_2, functional_iterates,
    g1_eigensystem, minimal_solution, rank_one_derivative_probe, solve_G1, solve_G2, solve_R1, solve_R2,
)


@pytest.fixture(scope="module")
def geom_two(two_phase):
    return spectral.extreme_points(two_phase)


def grid(g, n=10):
    return np.linspace(g.z1_min, g.z1_max, n + 2)[1:-1]


def test_scalar_G1_R1_at_one(scalar):
    # 0.2 X^2 - 0.5 X + 0.3 = 0 has roots 1 and 1.5
    G = solve_G1(scalar, 1.0)
    assert G.M[0, 0] == pytest.approx(1.0, abs=1e-10)
    R = solve_R1(scalar, 1.0)
    assert R.M[0, 0] == pytest.approx(1 / 1.5, abs=1e-10)
    assert spectral.spr(R.M) * 1.5 == pytest.approx(1.0, abs=1e-9)


def test_outside_interval_raises(scalar):
    with pytest.raises(DomainError):
        solve_G1(scalar, 2.0)
    with pytest.raises(DomainError):
        solve_R1(scalar, 0.5)


@pytest.mark.parametrize("method", ["functional", "cr", "auto"])
def test_methods_agree(two_phase, method):
    ref = solve_G1(two_phase, 1.2, method="functional").M
    got = solve_G1(two_phase, 1.2, method=method)
    assert np.allclose(got.M, ref, atol=1e-11)
    assert got.residual <= 1e-12


def test_cr_near_extreme_matches_minimal(two_phase, geom_two):
    z = geom_two.z1_max - 1e-3
    a = solve_G1(two_phase, z, method="cr").M
    b = solve_G1(two_phase, z, method="functional", tol=1e-15).M
    assert np.allclose(a, b, atol=1e-9)


def test_functional_iterates_are_monotone(two_phase):
    down, local, up = (two_phase.laurent.x2_step(k, 1.4) for k in (-1, 0, 1))
    prev = np.zeros((2, 2))
    for X in itertools.islice(functional_iterates(down, local, up), 300):
        assert np.all(X >= prev - 1e-15)
        prev = X


def test_G1_stochastic_under_negative_x2_drift(two_phase):
    assert drift_interior(two_phase)[1] < 0
    G = solve_G1(two_phase, 1.0).M
    assert np.allclose(G.sum(axis=1), 1.0, atol=1e-9)


def test_spectral_identities(two_phase, geom_two):
    for z in grid(geom_two, 20):
        p = spectral.zeta2(two_phase, z)
        assert abs(spectral.spr(solve_G1(two_phase, z).M) - p.lower) <= 1e-8
        assert abs(spectral.spr(solve_R1(two_phase, z).M) * p.upper - 1) <= 1e-8


def test_index_two_solvers(two_phase, geom_two):
    for w in np.linspace(geom_two.z2_min, geom_two.z2_max, 7)[1:-1]:
        G2, R2 = solve_G2(two_phase, w), solve_R2(two_phase, w)
        lau = two_phase.laurent
        dn, lo, up = (lau.x1_step(k, w) for k in (-1, 0, 1))
        assert np.max(np.abs(G2.M - (dn + lo @ G2.M + up @ G2.M @ G2.M))) <= 1e-12
        assert np.max(np.abs(R2.M - (R2.M @ R2.M @ dn + R2.M @ lo + up))) <= 1e-12
        p = spectral.zeta1(two_phase, w)
        assert abs(spectral.spr(G2.M) - p.lower) <= 1e-8
        assert G2.kind == "G2" and R2.kind == "R2"


def test_factorization_scalar(scalar):
    b = factorization_bundle(scalar, 1.0, [0.5, 1.0, 1.5])
    assert b.factorization_residual_max <= 1e-12
    assert b.H1[0, 0] == pytest.approx(0.5 + 0.2 * 1.0)


def test_factorization_bundle_invariants(two_phase, geom_two):
    for z in grid(geom_two, 5):
        b = factorization_bundle(two_phase, z, [0.4, 0.8, 1.2, 1.6, 2.0])
        assert b.factorization_residual_max <= 1e-10
        assert b.N_inverse_residual <= 1e-10
        assert b.H_residual <= 1e-12
        assert b.G_from_N_residual <= 1e-10
        assert b.R_from_N_residual <= 1e-10
    b2 = factorization_bundle_2(two_phase, 1.1, [0.7, 1.0, 1.3])
    assert b2.factorization_residual_max <= 1e-10


def test_factorization_at_one_reproduces_I_minus_Astar(two_phase):
    b = factorization_bundle(two_phase, 1.0, [1.0])
    I = np.eye(2)
    rhs = (I - b.R1) @ (I - b.H1) @ (I - b.G1)
    assert np.allclose(rhs, I - two_phase.A_star, atol=1e-10)


def test_zero_of_L_at_lower_zeta(two_phase):
    z = 1.3
    w = spectral.zeta2(two_phase, z).lower
    v = spectral.perron(two_phase.laurent.C(z, w)).v
    assert np.abs((np.eye(2) - two_phase.laurent.C(z, w)) @ v).max() <= 1e-8


def test_eigensystem(scalar, two_phase):
    e = g1_eigensystem(scalar, 1.0)
    assert np.allclose(e.eigenvalues, [1.0])
    e2 = g1_eigensystem(two_phase, 1.2)
    assert len(e2.eigenvalues) == 2 and e2.min_gap > 1e-9 and e2.distinct
    assert abs(e2.eigenvalues[-1]) == pytest.approx(spectral.zeta2(two_phase, 1.2).lower, abs=1e-8)
    vals, right, left = e2
    G = solve_G1(two_phase, 1.2).M
    assert np.allclose(G @ right, right * vals, atol=1e-10)


def test_det_L_dichotomy(two_phase, geom_two):
    for z in grid(geom_two, 6):
        roots = det_L_roots(two_phase, z)
        lower = spectral.zeta2(two_phase, z).lower
        small = roots[np.abs(roots) <= lower * (1 + 1e-7)]
        assert len(small) == two_phase.s0
        eig = g1_eigensystem(two_phase, z).eigenvalues
        assert np.allclose(np.sort_complex(small), np.sort_complex(eig), atol=1e-7)


def test_branch_probe_scalar_closed_form(scalar):
    b = branch_probe(scalar)
    # z(w) solves F = 0.2 z^2 - c(w) z + 0.3 = 0 with c(w) = 1 - 0.2 w - 0.3 / w;
    # at the top of the upper branch z' = 0, so z'' = -F_ww / F_z
    w0 = math.sqrt(1.5)
    c = 1 - 0.2 * w0 - 0.3 / w0
    z0 = (c + math.sqrt(c * c - 0.24)) / 0.4
    d2 = -(0.6 * z0 / w0**3) / (0.4 * z0 - c)
    assert d2 == pytest.approx(-3.7467, abs=1e-4)
    assert b.alpha_at_star == pytest.approx(w0, abs=1e-9)
    assert b.zeta1_second_derivative == pytest.approx(d2, rel=1e-6)
    assert b.scaling_constant == pytest.approx(math.sqrt(2 / -d2), rel=1e-6)
    for _, err in b.relative_errors():
        assert err <= 0.01


def test_branch_probe_two_phase(two_phase, geom_two):
    b = branch_probe(two_phase, geometry=geom_two)
    ratios = dict(b.samples)
    assert abs(ratios[1e-4] / ratios[1e-6] - 1) < 0.01
    assert all(err <= 0.01 for _, err in b.relative_errors())


def test_rank_one_probe(scalar, two_phase, geom_two):
    r = rank_one_derivative_probe(scalar)
    assert r.rank_gap == 0.0 and r.matrix_ratio[0, 0] > 0
    p = rank_one_derivative_probe(two_phase, geometry=geom_two)
    assert p.rank_gap < 0.05
    assert p.min_entry >= -1e-8
    assert p.predicted_direction_cosine > 0.999


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95))
def test_minimal_solution_is_minimal(frac):
    # random substochastic blocks; any other nonnegative solution dominates
    rng = np.random.default_rng(int(frac * 1e6))
    B = rng.random((3, 3, 3))
    B = B / B.sum(axis=(0, 2))[None, :, None]
    down, local, up = B[0], B[1] * frac, B[2]
    X, res, _, _ = minimal_solution(down, local, up)
    assert res <= 1e-12 and np.all(X >= 0)
    it = functional_iterates(down, local, up)
    for Y in itertools.islice(it, 50):
        assert np.all(Y <= X + 1e-12)
