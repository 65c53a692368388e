"""Parametric families of density matrices and their parameter derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import numat
from .errors import (
    CompletenessError,
    NormalizationError,
    NumericalError,
    PositivityError,
    TraceError,
    ValidationError,
)
from .expr import Expression

STATE_TOL = 1e-10
FAMILY_TOL = 1e-8
DEFAULT_STEP = 1e-5

KINDS = ("unitary", "kraus", "mixture", "pure_path", "diagonal", "expression")
DERIVATIVE_MODES = ("analytic", "central_difference")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated state. Build through :func:`validate_state`."""

    rho: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @cached_property
    def eig(self) -> numat.EigenSystem:
        es = numat.eigh(self.rho)
        return numat.EigenSystem(numat.clamp_spectrum(es.values, STATE_TOL), es.vectors)

    def rank(self, tol: float = STATE_TOL) -> int:
        return int(np.sum(self.eig.values > tol))

    def __array__(self, dtype=None, copy=None):
        return self.rho if dtype is None else self.rho.astype(dtype)


def validate_state(rho) -> DensityMatrix:
    """Check that ``rho`` is a density matrix and return a cleaned copy.

    The copy is symmetrized; eigenvalues in ``[-1e-10, 0)`` are clamped to
    zero (the matrix is only rebuilt from its spectrum when that happens).
    """
    herm = numat.hermitize(rho, STATE_TOL, "state")
    tr = np.trace(herm).real
    if abs(tr - 1.0) > STATE_TOL:
        raise TraceError(f"state trace {tr:.12g} differs from 1 by more than {STATE_TOL:.0e}")
    values, vectors = np.linalg.eigh(herm)
    if values[0] < -STATE_TOL:
        raise PositivityError(f"state has negative eigenvalue {values[0]:.6e}")
    if values[0] < 0:
        values = numat.clamp_spectrum(values, STATE_TOL)
        herm = (vectors * values) @ vectors.conj().T
        herm = 0.5 * (herm + herm.conj().T)
    return DensityMatrix(herm)


def as_point(p, nparams: int) -> np.ndarray:
    """Coerce a scalar or sequence into a finite parameter vector of length ``nparams``."""
    lam = np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1)
    if lam.size != nparams:
        raise ValidationError(f"expected {nparams} parameter value(s), got {lam.size}")
    if not np.all(np.isfinite(lam)):
        raise ValidationError("parameter values must be finite")
    return lam


class ExprArray:
    """Vector or matrix whose entries are constants or expression pairs.

    Each entry is stored as ``(re, im)`` where either part is a float or an
    :class:`Expression`. Accepted inputs per entry: a number, a complex
    number, an expression string (real part), ``[re, im]`` or
    ``{"re": ..., "im": ...}`` where each part is a number or a string.
    """

    def __init__(self, entries: np.ndarray):
        self._entries = entries
        self.shape = entries.shape
        self.nvars = 0
        self.is_constant = True
        for entry in entries.flat:
            for part in entry:
                if isinstance(part, Expression):
                    self.nvars = max(self.nvars, part.nvars)
                    self.is_constant = False

    @classmethod
    def from_nested(cls, data, ndim: int, path: str = "") -> "ExprArray":
        if isinstance(data, np.ndarray) and data.dtype != object:
            data = data.tolist()
        entries = np.empty(_nested_shape(data, ndim, path), dtype=object)
        for idx in np.ndindex(entries.shape):
            item = data
            for k in idx:
                item = item[k]
            entries[idx] = _parse_entry(item, path + "".join(f"[{k}]" for k in idx))
        return cls(entries)

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        out = np.empty(self.shape, dtype=complex)
        for idx, (re, im) in np.ndenumerate(self._entries):
            out[idx] = complex(_part(re, lam), _part(im, lam))
        return out

    def derivative(self, lam: np.ndarray, mu: int, h: float) -> np.ndarray:
        """Entry-wise central difference along parameter ``mu``."""
        out = np.zeros(self.shape, dtype=complex)
        if self.is_constant:
            return out
        up = lam.copy()
        dn = lam.copy()
        up[mu] += h
        dn[mu] -= h
        for idx, (re, im) in np.ndenumerate(self._entries):
            d = 0j
            if isinstance(re, Expression):
                d += (re(up) - re(dn)) / (2 * h)
            if isinstance(im, Expression):
                d += 1j * (im(up) - im(dn)) / (2 * h)
            out[idx] = d
        return out


def _nested_shape(data, ndim: int, path: str) -> tuple:
    if ndim == 1:
        if not isinstance(data, (list, tuple)):
            raise ValidationError(f"expected a list{_at(path)}")
        return (len(data),)
    if not isinstance(data, (list, tuple)) or not data:
        raise ValidationError(f"expected a non-empty nested list{_at(path)}")
    rows = [len(r) if isinstance(r, (list, tuple)) else -1 for r in data]
    if any(n != rows[0] for n in rows) or rows[0] < 0:
        raise ValidationError(f"ragged or malformed matrix{_at(path)}")
    return (len(data), rows[0])


def _at(path: str) -> str:
    return f" at {path}" if path else ""


def _parse_entry(item, path: str):
    if isinstance(item, (bool, type(None))):
        raise ValidationError(f"invalid matrix entry {item!r}{_at(path)}")
    if isinstance(item, (int, float, np.floating, np.integer)):
        return (float(item), 0.0)
    if isinstance(item, (complex, np.complexfloating)):
        return (float(item.real), float(item.imag))
    if isinstance(item, str):
        return (_parse_part(item, path), 0.0)
    if isinstance(item, (list, tuple)) and len(item) == 2:
        return (_parse_part(item[0], path + "[0]"), _parse_part(item[1], path + "[1]"))
    if isinstance(item, dict) and set(item) <= {"re", "im"}:
        return (
            _parse_part(item.get("re", 0.0), path + ".re"),
            _parse_part(item.get("im", 0.0), path + ".im"),
        )
    raise ValidationError(f"invalid matrix entry {item!r}{_at(path)}")


def _parse_part(part, path: str):
    if isinstance(part, bool):
        raise ValidationError(f"invalid entry part {part!r}{_at(path)}")
    if isinstance(part, (int, float)):
        return float(part)
    if isinstance(part, str):
        try:
            expr = Expression(part)
        except ValidationError as exc:
            exc.args = (f"{exc.args[0]}{_at(path)}",)
            raise
        if expr.nvars == 0:
            return expr(())
        return expr
    raise ValidationError(f"invalid entry part {part!r}{_at(path)}")


def _part(part, lam) -> float:
    return part(lam) if isinstance(part, Expression) else part


def _check_nvars(arrays, nparams: int):
    for arr in arrays:
        if arr.nvars > nparams:
            raise ValidationError(
                f"expression uses x{arr.nvars} but the family has {nparams} parameter(s)"
            )


class StateFamily:
    """Map from a parameter vector to a density matrix.

    Subclasses implement ``_rho`` (raw matrix) and ``_analytic_derivative``.
    Instances are treated as immutable once constructed.
    """

    kind: str = ""

    def __init__(self, dim: int, nparams: int, *, derivative: str = "analytic",
                 step: float = DEFAULT_STEP, ranges=None, name: str = ""):
        if derivative not in DERIVATIVE_MODES:
            raise ValidationError(f"unknown derivative mode {derivative!r}")
        if not step > 0:
            raise ValidationError(f"finite-difference step must be positive, got {step}")
        if not 1 <= dim <= numat.MAX_DIM:
            raise ValidationError(f"dimension {dim} outside 1..{numat.MAX_DIM}")
        if nparams < 1:
            raise ValidationError("a family needs at least one parameter")
        self.dim = dim
        self.nparams = nparams
        self.derivative_mode = derivative
        self.step = float(step)
        self.name = name
        if ranges is None:
            self.ranges = None
        else:
            rng = np.asarray(ranges, dtype=float).reshape(-1, 2)
            if rng.shape[0] != nparams or np.any(rng[:, 0] >= rng[:, 1]):
                raise ValidationError("ranges must be one increasing [lo, hi] pair per parameter")
            self.ranges = rng

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<{type(self).__name__}{label} dim={self.dim} nparams={self.nparams}>"

    def evaluate(self, p) -> DensityMatrix:
        lam = as_point(p, self.nparams)
        return validate_state(self._rho(lam))

    def derivative(self, p, mu: int = 0, *, mode: str | None = None) -> np.ndarray:
        lam = as_point(p, self.nparams)
        if not 0 <= mu < self.nparams:
            raise ValidationError(f"parameter index {mu} out of range for {self.nparams} parameter(s)")
        mode = mode or self.derivative_mode
        if mode == "analytic":
            d = self._analytic_derivative(lam, mu)
        elif mode == "central_difference":
            d = self._central_difference(lam, mu)
        else:
            raise ValidationError(f"unknown derivative mode {mode!r}")
        d = 0.5 * (d + d.conj().T)
        tr = abs(np.trace(d))
        if tr > FAMILY_TOL:
            raise NumericalError(f"state derivative has trace {tr:.3e}; family does not preserve normalization")
        return d

    def _central_difference(self, lam: np.ndarray, mu: int) -> np.ndarray:
        h = self.step
        up = lam.copy()
        dn = lam.copy()
        up[mu] += h
        dn[mu] -= h
        try:
            rp = self.evaluate(up).rho
            rm = self.evaluate(dn).rho
        except (ValidationError, NumericalError) as exc:
            raise NumericalError(
                f"central difference failed at parameter {mu} +/- {h:g}: {exc}"
            ) from exc
        return (rp - rm) / (2 * h)

    def _rho(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _analytic_derivative(self, lam: np.ndarray, mu: int) -> np.ndarray:
        raise NotImplementedError

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw from the declared parameter ranges."""
        if self.ranges is None:
            raise ValidationError("family declares no parameter ranges")
        return rng.uniform(self.ranges[:, 0], self.ranges[:, 1])


class UnitaryFamily(StateFamily):
    """``rho(l) = U rho0 U^dag`` with ``U = exp(-i l G)``."""

    kind = "unitary"

    def __init__(self, generator, rho0, **opts):
        g = numat.hermitize(generator, numat.HERMITIAN_TOL, "generator")
        state = rho0 if isinstance(rho0, DensityMatrix) else validate_state(rho0)
        if g.shape != state.rho.shape:
            raise ValidationError("generator and initial state dimensions differ")
        super().__init__(g.shape[0], 1, **opts)
        self.generator = g
        self.rho0 = state
        self._g_eig = numat.eigh(g)

    def unitary(self, lam) -> np.ndarray:
        lam = float(np.asarray(lam).reshape(-1)[0])
        vals, vecs = self._g_eig
        return (vecs * np.exp(-1j * lam * vals)) @ vecs.conj().T

    def _rho(self, lam):
        u = self.unitary(lam[0])
        return u @ self.rho0.rho @ u.conj().T

    def _analytic_derivative(self, lam, mu):
        u = self.unitary(lam[0])
        return -1j * (u @ numat.commutator(self.generator, self.rho0.rho) @ u.conj().T)


class KrausFamily(StateFamily):
    """``rho(l) = sum_k M_k(l) rho0 M_k(l)^dag`` for expression-valued Kraus operators."""

    kind = "kraus"

    def __init__(self, kraus, rho0, nparams: int | None = None, **opts):
        ops = [k if isinstance(k, ExprArray) else ExprArray.from_nested(k, 2, f"kraus[{i}]")
               for i, k in enumerate(kraus)]
        if not ops:
            raise ValidationError("at least one Kraus operator is required")
        state = rho0 if isinstance(rho0, DensityMatrix) else validate_state(rho0)
        d = state.dim
        for i, k in enumerate(ops):
            if k.shape != (d, d):
                raise ValidationError(f"Kraus operator {i} has shape {k.shape}, expected {(d, d)}")
        nparams = nparams or max(1, max(k.nvars for k in ops))
        _check_nvars(ops, nparams)
        super().__init__(d, nparams, **opts)
        self.kraus = ops
        self.rho0 = state

    def operators(self, lam) -> list[np.ndarray]:
        mats = [k(lam) for k in self.kraus]
        total = sum(m.conj().T @ m for m in mats)
        dev = numat.max_abs(total - np.eye(self.dim))
        if dev > FAMILY_TOL:
            raise CompletenessError(
                f"Kraus operators violate sum M^dag M = I by {dev:.3e} at {np.round(lam, 12).tolist()}"
            )
        return mats

    def _rho(self, lam):
        r0 = self.rho0.rho
        rho = sum(m @ r0 @ m.conj().T for m in self.operators(lam))
        return rho / np.trace(rho).real

    def _analytic_derivative(self, lam, mu):
        r0 = self.rho0.rho
        mats = self.operators(lam)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k, m in zip(self.kraus, mats):
            dm = k.derivative(lam, mu, self.step)
            term = dm @ r0 @ m.conj().T
            out += term + term.conj().T
        return out


def _weights(values: np.ndarray, what: str, lam) -> np.ndarray:
    total = values.sum()
    if abs(total - 1.0) > FAMILY_TOL:
        raise NormalizationError(
            f"{what} sum to {total:.12g}, not 1, at {np.round(lam, 12).tolist()}"
        )
    return values / total


class MixtureFamily(StateFamily):
    """``rho(l) = sum_k w_k(l) rho_k`` with fixed component states."""

    kind = "mixture"

    def __init__(self, states, weights, nparams: int | None = None, **opts):
        comps = [s if isinstance(s, DensityMatrix) else validate_state(s) for s in states]
        w = weights if isinstance(weights, ExprArray) else ExprArray.from_nested(list(weights), 1, "weights")
        if not comps or len(comps) != w.shape[0]:
            raise ValidationError("mixture needs one weight per component state")
        d = comps[0].dim
        if any(c.dim != d for c in comps):
            raise ValidationError("mixture components have different dimensions")
        nparams = nparams or max(1, w.nvars)
        _check_nvars([w], nparams)
        super().__init__(d, nparams, **opts)
        self.states = comps
        self.weights = w

    def _rho(self, lam):
        w = _weights(self.weights(lam).real, "mixture weights", lam)
        return sum(wk * s.rho for wk, s in zip(w, self.states))

    def _analytic_derivative(self, lam, mu):
        dw = self.weights.derivative(lam, mu, self.step).real
        return sum(dk * s.rho for dk, s in zip(dw, self.states)).astype(complex)


class PurePathFamily(StateFamily):
    """``rho(l) = |psi(l)><psi(l)|`` for an expression-valued vector."""

    kind = "pure_path"

    def __init__(self, vector, nparams: int | None = None, **opts):
        v = vector if isinstance(vector, ExprArray) else ExprArray.from_nested(list(vector), 1, "vector")
        nparams = nparams or max(1, v.nvars)
        _check_nvars([v], nparams)
        super().__init__(v.shape[0], nparams, **opts)
        self.vector = v

    def state_vector(self, p) -> np.ndarray:
        lam = as_point(p, self.nparams)
        psi = self.vector(lam)
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > FAMILY_TOL:
            raise NormalizationError(f"state vector norm {norm:.12g} at {np.round(lam, 12).tolist()}")
        return psi / norm

    def vector_derivative(self, p, mu: int = 0) -> np.ndarray:
        """Central difference of the normalized path."""
        lam = as_point(p, self.nparams)
        up = lam.copy()
        dn = lam.copy()
        up[mu] += self.step
        dn[mu] -= self.step
        return (self.state_vector(up) - self.state_vector(dn)) / (2 * self.step)

    def _rho(self, lam):
        return numat.projector(self.state_vector(lam))

    def _analytic_derivative(self, lam, mu):
        psi = self.state_vector(lam)
        dpsi = self.vector.derivative(lam, mu, self.step)
        term = np.outer(dpsi, psi.conj())
        return term + term.conj().T


class DiagonalFamily(StateFamily):
    """``rho(l) = diag(p_1(l), ..., p_d(l))``."""

    kind = "diagonal"

    def __init__(self, probabilities, nparams: int | None = None, **opts):
        p = probabilities if isinstance(probabilities, ExprArray) else \
            ExprArray.from_nested(list(probabilities), 1, "probabilities")
        nparams = nparams or max(1, p.nvars)
        _check_nvars([p], nparams)
        super().__init__(p.shape[0], nparams, **opts)
        self.probabilities = p

    def _rho(self, lam):
        return np.diag(_weights(self.probabilities(lam).real, "probabilities", lam)).astype(complex)

    def _analytic_derivative(self, lam, mu):
        return np.diag(self.probabilities.derivative(lam, mu, self.step).real).astype(complex)


class ExpressionFamily(StateFamily):
    """Every matrix entry given directly as an expression."""

    kind = "expression"

    def __init__(self, matrix, nparams: int | None = None, **opts):
        m = matrix if isinstance(matrix, ExprArray) else ExprArray.from_nested(matrix, 2, "matrix")
        if m.shape[0] != m.shape[1]:
            raise ValidationError(f"matrix must be square, got {m.shape}")
        nparams = nparams or max(1, m.nvars)
        _check_nvars([m], nparams)
        super().__init__(m.shape[0], nparams, **opts)
        self.matrix = m

    def _rho(self, lam):
        return self.matrix(lam)

    def _analytic_derivative(self, lam, mu):
        return self.matrix.derivative(lam, mu, self.step)


def evaluate_family(fam: StateFamily, p) -> DensityMatrix:
    return fam.evaluate(p)


def family_derivative(fam: StateFamily, p, mu: int = 0) -> np.ndarray:
    return fam.derivative(p, mu)


def constant_family(rho, **opts) -> ExpressionFamily:
    """A one-parameter family that ignores its parameter."""
    state = validate_state(rho)
    return ExpressionFamily(state.rho.tolist(), nparams=1, **opts)
