import json

import numpy as np
import pytest

from qfisher.errors import ModelFileError, ValidationError
from qfisher.modelfile import (
    BUNDLED,
    bundled,
    family_from_dict,
    load_family,
    load_povm,
    load_prior,
    povm_from_dict,
    prior_from_dict,
)
from qfisher.statemodel import KrausFamily, UnitaryFamily

DIAG = {"dim": 2, "nparams": 1, "kind": "diagonal", "probabilities": ["x", "1-x"]}


def test_all_bundled_models_load():
    for name in BUNDLED:
        fam = bundled(name)
        assert fam.name == name and fam.ranges is not None


def test_unknown_bundled():
    with pytest.raises(ValidationError):
        bundled("nope")


def test_bundled_kinds():
    assert isinstance(bundled("unitary_plus"), UnitaryFamily)
    assert isinstance(bundled("amplitude_damping"), KrausFamily)


def test_complex_entry_forms():
    doc = {"dim": 2, "nparams": 1, "kind": "unitary",
           "generator": [[0, [0, -0.5]], [[0, 0.5], 0]],
           "rho0": [[1, 0], [0, 0]]}
    fam = family_from_dict(doc)
    np.testing.assert_allclose(fam.generator, [[0, -0.5j], [0.5j, 0]])


def test_expression_dict_entry():
    doc = {"dim": 2, "nparams": 1, "kind": "expression",
           "matrix": [["x", {"re": "0.1", "im": "0.1*x"}], [{"re": 0.1, "im": "-0.1*x"}, "1-x"]]}
    rho = family_from_dict(doc).evaluate(0.5).rho
    np.testing.assert_allclose(rho, [[0.5, 0.1 + 0.05j], [0.1 - 0.05j, 0.5]])


def test_derivative_options():
    fam = family_from_dict(dict(DIAG, derivative={"mode": "central_difference", "step": 1e-4}))
    assert fam.derivative_mode == "central_difference" and fam.step == 1e-4


@pytest.mark.parametrize("patch,where", [
    ({"dim": 0}, "$.dim"),
    ({"kind": "weird"}, "$.kind"),
    ({"probabilities": "x"}, "$.probabilities"),
    ({"probabilities": ["x", True]}, "$.probabilities[1]"),
    ({"extra": 1}, "$"),
    ({"derivative": {"mode": "magic"}}, "$.derivative.mode"),
    ({"ranges": [[0, 1], [0, 1]]}, "$.ranges"),
    ({"probabilities": ["x", "1-x", "0"]}, "$.probabilities"),
])
def test_schema_errors_carry_field_path(patch, where):
    with pytest.raises(ModelFileError) as err:
        family_from_dict(dict(DIAG, **patch))
    assert err.value.path == where


def test_missing_payload():
    with pytest.raises(ModelFileError, match="generator"):
        family_from_dict({"dim": 2, "nparams": 1, "kind": "unitary", "rho0": [[1, 0], [0, 0]]})


def test_non_square_matrix():
    with pytest.raises(ModelFileError) as err:
        family_from_dict({"dim": 2, "nparams": 1, "kind": "expression", "matrix": [["x", 0], ["1-x"]]})
    assert err.value.path == "$.matrix"


def test_bad_expression_reports_location():
    with pytest.raises(ValidationError, match=r"probabilities\[1\]"):
        family_from_dict(dict(DIAG, probabilities=["x", "1-*x"]))


def test_invalid_state_is_model_error():
    doc = {"dim": 2, "nparams": 1, "kind": "unitary", "generator": [[1, 0], [0, -1]],
           "rho0": [[1, 0], [0, 1]]}
    with pytest.raises(ModelFileError):
        family_from_dict(doc)


def test_file_errors(tmp_path):
    with pytest.raises(ModelFileError, match="not found"):
        load_family(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ModelFileError, match="not valid JSON"):
        load_family(bad)


def test_povm_file(tmp_path):
    p = tmp_path / "povm.json"
    p.write_text(json.dumps({"elements": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]], "labels": ["up", "down"]}))
    povm = load_povm(p)
    assert povm.labels == ("up", "down") and len(povm) == 2


def test_povm_incomplete():
    with pytest.raises(ModelFileError):
        povm_from_dict({"elements": [[[1, 0], [0, 0]]]})


def test_prior_file(tmp_path):
    p = tmp_path / "prior.json"
    p.write_text(json.dumps({"density": "2.5", "interval": [0.05, 0.45]}))
    prior = load_prior(p)
    assert prior(0.2) == 2.5


def test_prior_not_normalized():
    with pytest.raises(ModelFileError):
        prior_from_dict({"density": "1", "interval": [0, 2]})
