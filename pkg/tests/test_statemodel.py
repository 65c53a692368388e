import numpy as np
import pytest

from qfisher import numat
from qfisher.errors import (
    CompletenessError,
    HermiticityError,
    NormalizationError,
    PositivityError,
    TraceError,
    ValidationError,
)
from qfisher.statemodel import (
    DiagonalFamily,
    ExpressionFamily,
    KrausFamily,
    MixtureFamily,
    PurePathFamily,
    UnitaryFamily,
    evaluate_family,
    family_derivative,
    validate_state,
)

from oracles import PLUS, SZ, random_density


def test_unitary_at_zero_is_rho0(phase):
    assert np.array_equal(evaluate_family(phase, 0.0).rho, PLUS)


def test_diagonal_substitution(diag):
    np.testing.assert_allclose(evaluate_family(diag, 0.25).rho, np.diag([0.25, 0.75]), atol=1e-15)


def test_amplitude_damping_hand_product(damping):
    # M0 |1><1| M0^+ = (1-x)|1><1| and M1 |1><1| M1^+ = x|0><0|
    np.testing.assert_allclose(evaluate_family(damping, 0.5).rho, np.diag([0.5, 0.5]), atol=1e-15)


def test_constant_family_derivative_is_zero(const):
    assert numat.max_abs(family_derivative(const, 0.4)) == 0.0


def test_diagonal_derivative(diag):
    for x in (0.1, 0.25, 0.8):
        np.testing.assert_allclose(family_derivative(diag, x), np.diag([1, -1]), atol=1e-9)


def test_unitary_derivative_sign(phase):
    # d/dl exp(-ilG) rho0 exp(ilG) at l=0 is -i[G, rho0]
    expected = np.array([[0, -0.5j], [0.5j, 0]])
    np.testing.assert_allclose(family_derivative(phase, 0.0), expected, atol=1e-15)
    np.testing.assert_allclose(phase.derivative(0.0, mode="central_difference"), expected, atol=1e-9)


def test_validate_state_accepts_maximally_mixed():
    assert validate_state(np.eye(2) / 2).dim == 2


def test_validate_state_trace():
    with pytest.raises(TraceError):
        validate_state(np.diag([0.5, 0.4]))


def test_validate_state_positivity():
    with pytest.raises(PositivityError):
        validate_state(np.diag([1.2, -0.2]))


def test_validate_state_hermiticity():
    with pytest.raises(HermiticityError):
        validate_state(np.array([[0.5, 0.1], [0.0, 0.5]]))


def test_validate_state_clamps_round_off():
    s = validate_state(np.diag([1.0 + 5e-11, -5e-11]))
    assert s.eig.values.min() == 0.0


def test_kraus_completeness_checked_each_evaluation():
    fam = KrausFamily([[[1, 0], [0, "sqrt(1-x)"]], [[0, "sqrt(x)"], [0, "x"]]], np.diag([0, 1]))
    fam.evaluate(0.0)
    with pytest.raises(CompletenessError):
        fam.evaluate(0.3)


def test_pure_path_normalization():
    fam = PurePathFamily(["cos(x)", "sin(x)*(1+1e-9)"])
    assert abs(np.linalg.norm(fam.state_vector(0.7)) - 1) < 1e-15
    bad = PurePathFamily(["cos(x)", "2*sin(x)"])
    with pytest.raises(NormalizationError):
        bad.evaluate(0.7)


def test_diagonal_weights_must_sum_to_one():
    fam = DiagonalFamily(["x", "1-2*x"])
    with pytest.raises(ValidationError):
        fam.evaluate(0.3)


def test_mixture_family():
    fam = MixtureFamily([np.diag([1, 0]), PLUS], ["x", "1-x"])
    np.testing.assert_allclose(fam.evaluate(0.25).rho, 0.25 * np.diag([1, 0]) + 0.75 * PLUS)
    np.testing.assert_allclose(fam.derivative(0.25), np.diag([1, 0]) - PLUS, atol=1e-9)


def test_nonhermitian_generator_rejected():
    with pytest.raises(HermiticityError):
        UnitaryFamily(np.array([[0, 1], [0, 0]]), PLUS)


def test_variable_beyond_nparams_rejected():
    with pytest.raises(ValidationError):
        DiagonalFamily(["x1", "x3", "1-x1-x3"], nparams=2)


def test_bad_step_rejected():
    with pytest.raises(ValidationError):
        DiagonalFamily(["x", "1-x"], step=0.0)


def _random_families(rng):
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    yield UnitaryFamily(g + g.conj().T, random_density(3, rng))
    yield ExpressionFamily([["x", {"re": "0.1*sin(x)", "im": "0.1*cos(x)"}],
                            [{"re": "0.1*sin(x)", "im": "-0.1*cos(x)"}, "1-x"]])
    yield PurePathFamily([{"re": "cos(x)", "im": 0}, {"re": "sin(x)*cos(2*x)", "im": "sin(x)*sin(2*x)"}])
    yield MixtureFamily([random_density(3, rng), random_density(3, rng)], ["x^2", "1-x^2"])


@pytest.mark.parametrize("seed", range(5))
def test_analytic_matches_central_difference(seed, families):
    rng = np.random.default_rng(seed)
    fams = list(families.values()) + list(_random_families(rng))
    for fam in fams:
        lam = fam.random_point(rng) if fam.ranges is not None else rng.uniform(0.3, 0.7, fam.nparams)
        for mu in range(fam.nparams):
            a = fam.derivative(lam, mu, mode="analytic")
            c = fam.derivative(lam, mu, mode="central_difference")
            assert numat.max_abs(a - c) <= 1e-6, fam
            assert abs(np.trace(a)) <= 1e-8
            assert numat.hermitian_defect(a) <= 1e-12


def test_unitary_spectrum_preserved():
    rng = np.random.default_rng(11)
    g = rng.normal(size=(4, 4))
    fam = UnitaryFamily(g + g.T, random_density(4, rng))
    ref = fam.rho0.eig.values
    for lam in rng.uniform(-5, 5, 10):
        np.testing.assert_allclose(fam.evaluate(lam).eig.values, ref, atol=1e-10)


def test_param_point_length_checked(qutrit):
    with pytest.raises(ValidationError):
        qutrit.evaluate([0.2])


def test_sigma_z_generator_unitary(phase):
    np.testing.assert_allclose(phase.unitary(0.3), np.diag(np.exp([-0.15j, 0.15j])), atol=1e-15)
    assert np.allclose(phase.generator, SZ / 2)
