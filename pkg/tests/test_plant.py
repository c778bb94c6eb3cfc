import numpy as np
import pytest

from rpisynth.errors import InvalidProblem
from rpisynth.plant import LpvProblem, augment, normalize_rows, validate


def test_example1_is_valid_single_vertex(ex1):
    rep = validate(ex1)
    assert rep.valid and rep.n_v == 1
    np.testing.assert_array_equal(ex1.A[0], [[1, 1], [0, 1]])


def test_example2_is_valid_with_four_vertices(ex2):
    rep = validate(ex2)
    assert rep.valid and rep.n_v == 4
    np.testing.assert_array_equal(ex2.B[0], ex2.B[3])  # shared input matrix


def test_zero_row_reported(ex1):
    bad = LpvProblem(ex1.A, ex1.B, ex1.Bp, ex1.C, ex1.Deta,
                     np.vstack([ex1.X, [[0.0, 0.0]]]), ex1.U, None, ex1.P, ex1.N)
    rep = validate(bad)
    assert not rep.valid and "ZeroRow" in rep.codes()


def test_unbounded_set_reported(ex1):
    bad = LpvProblem(ex1.A, ex1.B, ex1.Bp, ex1.C, ex1.Deta, ex1.X[:3], ex1.U, None, ex1.P, ex1.N)
    assert "Unbounded" in validate(bad).codes()


def test_augmented_example1(ex1):
    aug = augment(ex1)
    np.testing.assert_array_equal(aug.Aaug[0], [[1, 1, 2], [0, 1, 1], [0, 0, 1]])
    np.testing.assert_array_equal(aug.Baug, [[0], [0], [1]])
    assert aug.n_xi == 3
    assert aug.Xi.n_rows == ex1.X.shape[0] + ex1.U.shape[0]


def test_input_free_plant_rejected(ex1):
    bad = LpvProblem(ex1.A, np.zeros((2, 0)), ex1.Bp, ex1.C, ex1.Deta,
                     ex1.X, np.zeros((2, 0)), None, ex1.P, ex1.N)
    with pytest.raises(InvalidProblem):
        augment(bad)


def test_example2_row_counts(ex2):
    aug = augment(ex2)
    assert aug.l_xi == 6
    assert aug.l_d == 10
    assert ex2.n_d == ex2.n_p + 2 * ex2.n_eta


def test_big_disturbance_set_is_block_diagonal(ex2):
    aug = augment(ex2)
    lp, ln = ex2.P.shape[0], ex2.N.shape[0]
    D = aug.Dbig.P
    np.testing.assert_array_equal(D[:lp, :ex2.n_p], ex2.P)
    np.testing.assert_array_equal(D[lp:lp + ln, ex2.n_p:ex2.n_p + ex2.n_eta], ex2.N)
    np.testing.assert_array_equal(D[lp + ln:, ex2.n_p + ex2.n_eta:], ex2.N)
    assert np.count_nonzero(D[:lp, ex2.n_p:]) == 0


def test_normalize_rows():
    np.testing.assert_allclose(normalize_rows([[2.0, 0.0], [0.0, -4.0]], [2.0, 0.5]),
                               [[1.0, 0.0], [0.0, -8.0]])
    with pytest.raises(ValueError):
        normalize_rows([[1.0]], [0.0])


def test_constant_terms_lifted_to_vertex_count(ex1_lpv):
    assert ex1_lpv.n_v == 2
    np.testing.assert_array_equal(ex1_lpv.A[0], ex1_lpv.A[1])
    assert ex1_lpv.B[0][0, 0] == 2.0 and ex1_lpv.B[1][0, 0] == 2.25
