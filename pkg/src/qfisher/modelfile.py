"""Model, POVM and prior files (JSON) and the bundled example models.

Matrices are row-major nested lists. An entry is a number, ``[re, im]``,
an expression string (real valued) or ``{"re": ..., "im": ...}`` whose parts
are numbers or expression strings. See ``docs/file-formats.md``.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ModelFileError, ValidationError
from .measure import POVM
from .qfi import Prior
from .statemodel import (
    DEFAULT_STEP,
    DiagonalFamily,
    ExpressionFamily,
    ExprArray,
    KrausFamily,
    MixtureFamily,
    PurePathFamily,
    StateFamily,
    UnitaryFamily,
)

BUNDLED = ("diagonal_qubit", "rotation_path", "unitary_plus", "amplitude_damping", "qutrit_diagonal")

_PART = {"oneOf": [{"type": "number"}, {"type": "string"}]}
_ENTRY = {
    "oneOf": [
        {"type": "number"},
        {"type": "string"},
        {"type": "array", "items": _PART, "minItems": 2, "maxItems": 2},
        {
            "type": "object",
            "properties": {"re": _PART, "im": _PART},
            "additionalProperties": False,
        },
    ]
}
_VECTOR = {"type": "array", "items": _ENTRY, "minItems": 1}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _ENTRY, "minItems": 1}, "minItems": 1}

_PAYLOAD = {
    "unitary": ("generator", "rho0"),
    "kraus": ("kraus", "rho0"),
    "mixture": ("states", "weights"),
    "pure_path": ("vector",),
    "diagonal": ("probabilities",),
    "expression": ("matrix",),
}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dim", "nparams", "kind"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "dim": {"type": "integer", "minimum": 1, "maximum": 64},
        "nparams": {"type": "integer", "minimum": 1},
        "kind": {"enum": list(_PAYLOAD)},
        "generator": _MATRIX,
        "rho0": _MATRIX,
        "kraus": {"type": "array", "items": _MATRIX, "minItems": 1},
        "states": {"type": "array", "items": _MATRIX, "minItems": 1},
        "weights": _VECTOR,
        "vector": _VECTOR,
        "probabilities": _VECTOR,
        "matrix": _MATRIX,
        "derivative": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["analytic", "central_difference"]},
                "step": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "ranges": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": k}}}, "then": {"required": list(v)}}
        for k, v in _PAYLOAD.items()
    ],
}

POVM_SCHEMA = {
    "type": "object",
    "required": ["elements"],
    "properties": {
        "elements": {"type": "array", "items": _MATRIX, "minItems": 1},
        "labels": {"type": "array", "items": {"type": ["string", "number"]}},
    },
    "additionalProperties": False,
}

PRIOR_SCHEMA = {
    "type": "object",
    "required": ["density", "interval"],
    "properties": {
        "density": {"type": "string"},
        "interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
    "additionalProperties": False,
}


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _validate(doc, schema, what: str):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ModelFileError(f"invalid {what}: {err.message}", _json_path(err.absolute_path))


def read_json(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ModelFileError(f"file not found: {p}") from None
    except OSError as exc:
        raise ModelFileError(f"cannot read {p}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{p} is not valid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None


def _matrix(data, path: str) -> np.ndarray:
    arr = ExprArray.from_nested(data, 2, path)
    if not arr.is_constant:
        raise ModelFileError("matrix must be constant here", path)
    return arr(np.zeros(0))


def family_from_dict(doc: dict) -> StateFamily:
    """Build a :class:`StateFamily` from a parsed model document."""
    _validate(doc, MODEL_SCHEMA, "model")
    d, n, kind = doc["dim"], doc["nparams"], doc["kind"]
    deriv = doc.get("derivative", {})
    opts = dict(
        derivative=deriv.get("mode", "analytic"),
        step=deriv.get("step", DEFAULT_STEP),
        ranges=doc.get("ranges"),
        name=doc.get("name", ""),
    )

    def square(data, field):
        rows = len(data)
        if rows != d or any(len(r) != d for r in data):
            raise ModelFileError(f"matrix must be {d}x{d}", f"$.{field}")

    def length(data, field):
        if len(data) != d:
            raise ModelFileError(f"expected {d} entries, got {len(data)}", f"$.{field}")

    if opts["ranges"] is not None and len(opts["ranges"]) != n:
        raise ModelFileError(f"expected {n} ranges", "$.ranges")
    try:
        if kind == "unitary":
            square(doc["generator"], "generator")
            square(doc["rho0"], "rho0")
            if n != 1:
                raise ModelFileError("unitary families have exactly one parameter", "$.nparams")
            return UnitaryFamily(_matrix(doc["generator"], "$.generator"),
                                 _matrix(doc["rho0"], "$.rho0"), **opts)
        if kind == "kraus":
            for i, k in enumerate(doc["kraus"]):
                square(k, f"kraus[{i}]")
            square(doc["rho0"], "rho0")
            ops = [ExprArray.from_nested(k, 2, f"$.kraus[{i}]") for i, k in enumerate(doc["kraus"])]
            return KrausFamily(ops, _matrix(doc["rho0"], "$.rho0"), nparams=n, **opts)
        if kind == "mixture":
            for i, s in enumerate(doc["states"]):
                square(s, f"states[{i}]")
            states = [_matrix(s, f"$.states[{i}]") for i, s in enumerate(doc["states"])]
            return MixtureFamily(states, ExprArray.from_nested(doc["weights"], 1, "$.weights"),
                                 nparams=n, **opts)
        if kind == "pure_path":
            length(doc["vector"], "vector")
            return PurePathFamily(ExprArray.from_nested(doc["vector"], 1, "$.vector"), nparams=n, **opts)
        if kind == "diagonal":
            length(doc["probabilities"], "probabilities")
            return DiagonalFamily(ExprArray.from_nested(doc["probabilities"], 1, "$.probabilities"),
                                  nparams=n, **opts)
        square(doc["matrix"], "matrix")
        return ExpressionFamily(ExprArray.from_nested(doc["matrix"], 2, "$.matrix"), nparams=n, **opts)
    except ModelFileError:
        raise
    except ValidationError as exc:
        raise ModelFileError(f"invalid {kind} model: {exc}") from exc


def load_family(path) -> StateFamily:
    return family_from_dict(read_json(path))


def povm_from_dict(doc: dict) -> POVM:
    _validate(doc, POVM_SCHEMA, "POVM")
    elems = [_matrix(e, f"$.elements[{i}]") for i, e in enumerate(doc["elements"])]
    labels = tuple(str(x) for x in doc.get("labels", ()))
    try:
        return POVM(tuple(elems), labels)
    except ValidationError as exc:
        raise ModelFileError(f"invalid POVM: {exc}") from exc


def load_povm(path) -> POVM:
    return povm_from_dict(read_json(path))


def prior_from_dict(doc: dict) -> Prior:
    _validate(doc, PRIOR_SCHEMA, "prior")
    a, b = doc["interval"]
    try:
        return Prior.from_expression(doc["density"], a, b)
    except ValidationError as exc:
        raise ModelFileError(f"invalid prior: {exc}") from exc


def load_prior(path) -> Prior:
    return prior_from_dict(read_json(path))


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ValidationError(f"unknown bundled model {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("qfisher") / "models" / f"{name}.json"))


def bundled(name: str) -> StateFamily:
    """One of the example families shipped with the package."""
    return load_family(bundled_path(name))
