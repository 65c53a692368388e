import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfisher.errors import SingularFisherError, ValidationError
from qfisher.multiparam import (
    MATRIX_BOUND_NOTE,
    QFIMatrix,
    Reparam,
    crb_bounds,
    first_coordinate_bound,
    qfi_matrix,
    qfi_matrix_from_derivatives,
    reparametrize,
)
from qfisher.qfi import qfi_scalar
from qfisher.statemodel import DiagonalFamily, ExpressionFamily

from oracles import qutrit_qfi

HALF = [[0.5, 0.5], [0.5, -0.5]]


def test_qutrit_matrix(qutrit):
    np.testing.assert_allclose(qfi_matrix(qutrit, [0.25, 0.25]).H, [[6, 2], [2, 6]], atol=1e-8)


def test_single_parameter_reduces_to_scalar(diag, phase, path):
    for fam, lam in ((diag, 0.25), (phase, 0.4), (path, 0.9)):
        assert qfi_matrix(fam, lam).H[0, 0] == pytest.approx(qfi_scalar(fam, lam).H, abs=1e-9)
    assert qfi_matrix(diag, 0.25).H[0, 0] == pytest.approx(16 / 3, abs=1e-9)


def test_constant_family_zero_matrix(const):
    assert np.all(qfi_matrix(const, 0.2).H == 0)


def test_crb_qutrit():
    res = crb_bounds(QFIMatrix([[6, 2], [2, 6]]), 1)
    np.testing.assert_allclose(res.variances, [0.1875, 0.1875], atol=1e-15)
    np.testing.assert_allclose(res.covariance, np.array([[6, -2], [-2, 6]]) / 32, atol=1e-15)
    assert res.note == MATRIX_BOUND_NOTE


def test_crb_diagonal():
    res = crb_bounds(QFIMatrix(np.diag([2.0, 8.0])), 4)
    np.testing.assert_allclose(res.variances, [1 / 8, 1 / 32])


def test_crb_singular_reports_null_direction():
    with pytest.raises(SingularFisherError) as err:
        crb_bounds(QFIMatrix([[1, 1], [1, 1]]))
    v = err.value.null_direction
    assert abs(abs(v @ np.array([1, -1]) / np.sqrt(2)) - 1) < 1e-12


def test_qfi_matrix_validation():
    with pytest.raises(ValidationError):
        QFIMatrix([[1, 0.5], [0.4, 1]])
    with pytest.raises(ValidationError):
        QFIMatrix([[1, 0], [0, -1]])


def test_reparam_identity():
    H = QFIMatrix([[6, 2], [2, 6]])
    np.testing.assert_array_equal(reparametrize(H, Reparam(np.eye(2))).H, H.H)


def test_reparam_sum_and_difference():
    Ht = reparametrize(QFIMatrix(qutrit_qfi(0.25, 0.25)), Reparam(HALF))
    np.testing.assert_allclose(Ht.H, [[4, 0], [0, 2]], atol=1e-12)
    assert first_coordinate_bound(Ht, 1) == pytest.approx(0.25, abs=1e-12)
    assert first_coordinate_bound(Ht, 10) == pytest.approx(0.025, abs=1e-12)


def test_reparam_permutation():
    H = QFIMatrix([[1, 2], [2, 7]])
    np.testing.assert_array_equal(reparametrize(H, Reparam([[0, 1], [1, 0]])).H, [[7, 2], [2, 1]])


def test_reparam_shape_mismatch():
    with pytest.raises(ValidationError):
        reparametrize(QFIMatrix(np.eye(3)), Reparam(np.eye(2)))


def test_reparam_from_expressions():
    # old coordinates l = (g + h, g - h) written in new coordinates (x1, x2) = (g, h)
    b = Reparam.from_old_of_new(["x1 + x2", "x1 - x2"], [0.5, 0.0])
    np.testing.assert_allclose(b.B, [[1, 1], [1, -1]], atol=1e-9)
    # new coordinates g = l1 + l2, h = l1 - l2 written in old ones
    b2 = Reparam.from_new_of_old(["x1 + x2", "x1 - x2"], [0.25, 0.25])
    np.testing.assert_allclose(b2.B, HALF, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
def test_congruence_roundtrip(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    H = QFIMatrix(a @ a.T)
    b = rng.normal(size=(n, n)) + 2 * np.eye(n)
    B = Reparam(b)
    if np.linalg.cond(b) > 1e6:
        return
    back = reparametrize(reparametrize(H, B), B.inverse())
    assert np.max(np.abs(back.H - H.H)) <= 1e-9 * max(1.0, np.max(np.abs(H.H)))


def test_symmetric_psd_on_random_families():
    rng = np.random.default_rng(12)
    for _ in range(10):
        fam = ExpressionFamily([["x1", {"re": "0.2*x2", "im": "0.1*x1*x2"}],
                                [{"re": "0.2*x2", "im": "-0.1*x1*x2"}, "1 - x1"]], nparams=2)
        lam = rng.uniform([0.3, -0.5], [0.7, 0.5])
        H = qfi_matrix(fam, lam).H
        assert np.allclose(H, H.T, atol=1e-10)
        assert np.linalg.eigvalsh(H).min() >= -1e-8
        np.testing.assert_allclose(qfi_matrix_from_derivatives(fam, lam), H, atol=1e-8)


def test_classical_model_matches_classical_fisher():
    fam = DiagonalFamily(["x1*x2", "x1*(1-x2)", "1-x1"], nparams=2)
    rng = np.random.default_rng(2)
    for _ in range(5):
        x1, x2 = rng.uniform(0.2, 0.8, 2)
        p = np.array([x1 * x2, x1 * (1 - x2), 1 - x1])
        dp = np.array([[x2, 1 - x2, -1], [x1, -x1, 0]])
        oracle = (dp / p) @ dp.T
        np.testing.assert_allclose(qfi_matrix(fam, [x1, x2]).H, oracle, atol=1e-8)
