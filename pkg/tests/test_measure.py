import warnings

import numpy as np
import pytest

from qfisher.errors import NoInformationError, ValidationError
from qfisher.measure import (
    POVM,
    SkippedOutcomeWarning,
    born_probs,
    classical_fisher,
    classical_fisher_matrix,
    estimator_moments,
    fisher_from_probs,
    optimal_estimator,
    optimal_povm,
    random_povm,
    saturation_defect,
    spectral_projectors,
)
from qfisher.qfi import qfi_scalar
from qfisher.sld import sld

from oracles import PLUS, binary_fisher, qutrit_qfi, random_density


def test_born_diagonal():
    np.testing.assert_allclose(born_probs(np.diag([0.25, 0.75]), POVM.computational(2)), [0.25, 0.75])


def test_born_trivial_povm():
    assert born_probs(random_density(3, np.random.default_rng(0)), POVM((np.eye(3),))).tolist() == [1.0]


def test_born_plus():
    np.testing.assert_allclose(born_probs(PLUS, POVM.computational(2)), [0.5, 0.5])


def test_born_dimension_mismatch():
    with pytest.raises(ValidationError):
        born_probs(np.eye(3) / 3, POVM.computational(2))


def test_povm_validation():
    with pytest.raises(ValidationError):
        POVM((np.diag([1, 0]), np.diag([0, 0.9])))
    with pytest.raises(ValidationError):
        POVM((np.diag([1.1, 0]), np.diag([-0.1, 1])))
    with pytest.raises(ValidationError):
        POVM((np.eye(2),), ("a", "b"))


def test_fisher_pure_path_computational(path):
    for lam in (0.3, 0.9):
        assert classical_fisher(path, POVM.computational(2), lam) == pytest.approx(4.0, abs=1e-8)


def test_fisher_trivial_povm(path):
    assert classical_fisher(path, POVM((np.eye(2),)), 0.3) <= 1e-15


def test_fisher_diagonal(diag):
    assert classical_fisher(diag, POVM.computational(2), 0.25) == pytest.approx(16 / 3, abs=1e-9)


def test_fisher_rotated_binary_closed_form(diag):
    t = 0.3
    c, s = np.cos(t), np.sin(t)
    povm = POVM.from_basis(np.array([[c, -s], [s, c]]))
    x = 0.4
    p0 = x * c * c + (1 - x) * s * s
    assert classical_fisher(diag, povm, x) == pytest.approx(binary_fisher(p0, c * c - s * s), rel=1e-9)


def test_skipped_outcome_warns():
    with pytest.warns(SkippedOutcomeWarning):
        f = fisher_from_probs([1.0, 0.0], [-1.0, 1.0], ["a", "b"])
    assert f == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fisher_from_probs([1.0, 0.0], [0.0, 0.0])


def test_optimal_povm_diagonal_is_computational(diag):
    povm = optimal_povm(diag, 0.25)
    got = sorted((np.round(e.real, 9).tolist() for e in povm.elements))
    assert got == sorted([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]])


def test_optimal_povm_pure_path_quarter_pi(path):
    povm = optimal_povm(path, np.pi / 4)
    for e in povm.elements:
        assert abs(e[0, 1]) < 1e-9 and abs(abs(e[0, 0] - e[1, 1]) - 1) < 1e-9


def test_optimal_povm_constant_family(const):
    povm = optimal_povm(const, 0.5)
    assert len(povm) == 1
    assert classical_fisher(const, povm, 0.5) == 0.0


def test_spectral_projectors_merge():
    projs, evs = spectral_projectors(np.diag([1.0, 1.0 + 1e-9, 3.0]))
    assert len(projs) == 2 and evs[1] == 3.0
    np.testing.assert_allclose(projs[0], np.diag([1, 1, 0]), atol=1e-15)


def test_optimal_estimator_diagonal(diag):
    est = optimal_estimator(diag, 0.25)
    np.testing.assert_allclose(est.op, np.diag([1.0, 0.0]), atol=1e-10)


def test_optimal_estimator_pure_path(path):
    lam = np.pi / 4
    est = optimal_estimator(path, lam)
    np.testing.assert_allclose(est.op, np.diag([lam - 0.5, lam + 0.5]), atol=1e-9)


def test_optimal_estimator_constant(const):
    with pytest.raises(NoInformationError):
        optimal_estimator(const, 0.5)


def test_estimator_moments_all_families(families, mixed_phase):
    rng = np.random.default_rng(3)
    fams = [f for f in families.values() if f.nparams == 1] + [mixed_phase]
    for fam in fams:
        for _ in range(5):
            lam = fam.random_point(rng)
            est = optimal_estimator(fam, lam)
            mean, var = estimator_moments(fam.evaluate(lam), est)
            assert abs(mean - lam[0]) <= 1e-8
            assert var == pytest.approx(1 / est.H, rel=1e-6)


@pytest.mark.parametrize("kind", ["rotated", "binned", "general"])
def test_random_povms_never_beat_qfi(families, kind):
    rng = np.random.default_rng(17)
    for fam in families.values():
        for seed in range(15):
            lam = fam.random_point(rng)
            povm = random_povm(fam.dim, seed, kind)
            if fam.nparams == 1:
                h = qfi_scalar(fam, lam).H
                assert classical_fisher(fam, povm, lam) <= h * (1 + 1e-8)
            else:
                f = classical_fisher_matrix(fam, povm, lam)
                gap = np.linalg.eigvalsh(qutrit_qfi(*lam) - f)
                assert gap.min() >= -1e-8


def test_random_povm_is_seeded():
    a = random_povm(3, 5, "general")
    b = random_povm(3, 5, "general")
    assert all(np.array_equal(x, y) for x, y in zip(a.elements, b.elements))


def test_random_povm_unknown_kind():
    with pytest.raises(ValidationError):
        random_povm(2, 0, "bogus")


def test_optimal_povm_saturates(families, mixed_phase):
    rng = np.random.default_rng(4)
    fams = [f for f in families.values() if f.nparams == 1] + [mixed_phase]
    for fam in fams:
        for _ in range(5):
            lam = fam.random_point(rng)
            povm = optimal_povm(fam, lam)
            h = qfi_scalar(fam, lam).H
            assert classical_fisher(fam, povm, lam) == pytest.approx(h, rel=1e-6)
            assert saturation_defect(fam.evaluate(lam), povm, sld(fam, lam)) <= 1e-8


def test_classical_fisher_matrix_qutrit(qutrit):
    f = classical_fisher_matrix(qutrit, POVM.computational(3), [0.25, 0.25])
    np.testing.assert_allclose(f, [[6, 2], [2, 6]], atol=1e-8)
