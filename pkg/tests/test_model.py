import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import scalar_walk
from qbd2d.exceptions import ModelError
from qbd2d.model import ModelSpec, eval_C, load_model, reflecting_model, save_model, validate


def write(tmp_path, data, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return p


SCALAR_FILE = {
    "s0": 1,
    "A": {"1,0": [[0.2]], "-1,0": [[0.3]], "0,1": [[0.2]], "0,-1": [[0.3]]},
    "A1": {"1,0": [[0.2]], "-1,0": [[0.3]], "0,0": [[0.3]], "0,1": [[0.2]]},
    "A2": {"0,1": [[0.2]], "0,-1": [[0.3]], "0,0": [[0.3]], "1,0": [[0.2]]},
    "A0": {"0,0": [[0.6]], "1,0": [[0.2]], "0,1": [[0.2]]},
}


def test_load_reads_entries_verbatim(tmp_path):
    m = load_model(write(tmp_path, SCALAR_FILE))
    assert m.s0 == 1
    assert m.A[(1, 0)][0, 0] == 0.2 and m.A[(-1, 0)][0, 0] == 0.3
    assert m.A[(0, 1)][0, 0] == 0.2 and m.A[(0, -1)][0, 0] == 0.3
    assert len(m.A) == 9 and len(m.A1) == 6 and len(m.A2) == 6 and len(m.A0) == 4
    assert m.A[(1, 1)][0, 0] == 0.0


def test_missing_origin_defaults_to_zero_and_fails_stochasticity(tmp_path):
    data = dict(SCALAR_FILE)
    del data["A0"]
    m = load_model(write(tmp_path, data))
    assert all(np.all(b == 0) for b in m.A0.values())
    rep = validate(m)
    assert not rep.stochasticity_ok
    assert any("A0" in msg for msg in rep.messages)


def test_negative_entry_rejected(tmp_path):
    data = json.loads(json.dumps(SCALAR_FILE))
    data["A"]["1,0"] = [[-0.1]]
    with pytest.raises(ModelError, match="negative entry"):
        load_model(write(tmp_path, data))


def test_dimension_mismatch_rejected(tmp_path):
    data = json.loads(json.dumps(SCALAR_FILE))
    data["A"]["1,0"] = [[0.1, 0.1]]
    with pytest.raises(ModelError, match="dimension mismatch"):
        load_model(write(tmp_path, data))


def test_parse_error(tmp_path):
    with pytest.raises(ModelError, match="parse error"):
        load_model(write(tmp_path, "{not json"))


def test_illegal_index_rejected(tmp_path):
    data = json.loads(json.dumps(SCALAR_FILE))
    data["A1"]["0,-1"] = [[0.1]]
    with pytest.raises(ModelError, match="illegal index"):
        load_model(write(tmp_path, data))


def test_round_trip(tmp_path, two_phase):
    p = tmp_path / "rt.json"
    save_model(two_phase, p)
    back = load_model(p)
    for name in ("A", "A1", "A2", "A0"):
        for k, v in getattr(two_phase, name).items():
            assert np.array_equal(getattr(back, name)[k], v)


def test_blocks_are_read_only(scalar):
    with pytest.raises(ValueError):
        scalar.A[(1, 0)][0, 0] = 0.5


def test_validate_scalar(scalar):
    rep = validate(scalar)
    assert rep.stochasticity_ok
    assert ("A_star_irreducible", "pass") in rep.irreducibility_checks
    assert ("A_star_aperiodic", "pass") in rep.irreducibility_checks
    assert ("lattice_irreducible", "indeterminate") in rep.irreducibility_checks
    assert rep.distinct_eigenvalue_check == "pass"
    assert rep.ok


def test_periodic_phase_matrix_fails_aperiodicity():
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    m = reflecting_model({(1, 0): 0.25 * P, (-1, 0): 0.25 * P, (0, 1): 0.25 * P, (0, -1): 0.25 * P}, 2)
    rep = validate(m)
    assert ("A_star_aperiodic", "fail") in rep.irreducibility_checks
    assert not rep.ok


def test_row_sum_099_fails():
    m = ModelSpec(1, {(1, 0): [[0.2]], (-1, 0): [[0.3]], (0, 1): [[0.2]], (0, -1): [[0.29]]},
                  scalar_walk(0.2, 0.3, 0.2, 0.3).A1, scalar_walk(0.2, 0.3, 0.2, 0.3).A2,
                  scalar_walk(0.2, 0.3, 0.2, 0.3).A0)
    assert not validate(m).stochasticity_ok


def test_eval_C_values(scalar):
    assert eval_C(scalar, 1, 1)[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert eval_C(scalar, 2, 1)[0, 0] == pytest.approx(0.2 * 2 + 0.3 / 2 + 0.2 + 0.3, abs=1e-15)


def test_eval_C_at_one_is_block_sum(two_phase):
    assert np.allclose(eval_C(two_phase, 1.0, 1.0), two_phase.A_star, atol=1e-15)
    lau = two_phase.laurent
    assert np.allclose(lau.C0(1, 1), two_phase.family_sum("A0"))
    assert np.allclose(lau.C1(1, 1), two_phase.family_sum("A1"))
    assert np.allclose(lau.C2(1, 1), two_phase.family_sum("A2"))


def test_zero_argument_rejected(scalar):
    with pytest.raises(ValueError, match="zero argument"):
        eval_C(scalar, 0, 1)
    with pytest.raises(ValueError, match="zero argument"):
        eval_C(scalar, 1, 0)


def test_complex_arguments(two_phase):
    z, w = 0.7 + 0.4j, 1.1 - 0.2j
    direct = sum(m * z**i * w**j for (i, j), m in two_phase.A.items())
    assert np.allclose(eval_C(two_phase, z, w), direct)


def test_laurent_step_identities(two_phase):
    lau = two_phase.laurent
    z, w = 1.3, 0.8
    by_x2 = sum(lau.x2_step(k, z) * w**k for k in (-1, 0, 1))
    by_x1 = sum(lau.x1_step(k, w) * z**k for k in (-1, 0, 1))
    assert np.allclose(by_x2, lau.C(z, w))
    assert np.allclose(by_x1, lau.C(z, w))
    assert np.allclose(lau.C1_mat(z, w * np.eye(2)), lau.C1(z, w))
    assert np.allclose(lau.C0_mat(z, w * np.eye(2)), lau.C0(z, w))
    I = np.eye(2)
    assert np.allclose(lau.L(z, w), z * w * (lau.C(z, w) - I))


def test_swapped_is_an_involution(two_phase):
    back = two_phase.swapped().swapped()
    for name in ("A", "A1", "A2", "A0"):
        for k, v in getattr(two_phase, name).items():
            assert np.array_equal(getattr(back, name)[k], v)
    lau, sw = two_phase.laurent, two_phase.swapped().laurent
    assert np.allclose(lau.C(1.2, 0.7), sw.C(0.7, 1.2))
    assert np.allclose(lau.C1(1.2, 0.7), sw.C2(0.7, 1.2))


positive = st.floats(0.2, 3.0)


@settings(max_examples=60, deadline=None)
@given(z=positive, w=positive)
def test_C2hat_with_scalar_matrix_is_w_times_C2(two_phase, z, w):
    lau = two_phase.laurent
    assert np.allclose(lau.C2_hat(z, w * np.eye(2)), w * lau.C2(z, w), rtol=1e-13, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(z=positive, w=positive, bump=st.floats(0.0, 0.5), key=st.sampled_from([(1, 0), (0, -1), (1, 1), (-1, -1)]))
def test_C_nonnegative_and_monotone_in_blocks(two_phase, z, w, bump, key):
    C = eval_C(two_phase, z, w)
    assert np.all(C >= 0)
    A = dict(two_phase.A)
    A[key] = A[key] + bump
    bigger = ModelSpec(2, A, two_phase.A1, two_phase.A2, two_phase.A0)
    assert np.all(eval_C(bigger, z, w) >= C - 1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=5, max_size=5))
def test_validated_models_have_stochastic_C11(ps):
    ps = np.array(ps) / sum(ps)
    m = scalar_walk(*ps[:4])
    assert validate(m).stochasticity_ok
    assert abs(eval_C(m, 1, 1) @ np.ones(1) - 1)[0] <= 1e-12
