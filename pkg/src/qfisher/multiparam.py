"""Quantum Fisher information matrix, matrix Cramer-Rao bound and reparametrization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numat
from .errors import SingularFisherError, ValidationError
from .expr import Expression
from .sld import RANK_TOL, sld_eigen
from .statemodel import StateFamily, as_point

SYMMETRY_TOL = 1e-10
PSD_SLACK = 1e-8
MAX_CONDITION = 1e12

MATRIX_BOUND_NOTE = (
    "the matrix inequality Cov >= H^-1/M need not be attainable when several "
    "parameters are estimated jointly; each diagonal entry is attainable for "
    "its parameter when the others are held fixed"
)


@dataclass(frozen=True, eq=False)
class QFIMatrix:
    H: np.ndarray

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.H, dtype=float))
        if h.shape[0] != h.shape[1]:
            raise ValidationError(f"Fisher matrix must be square, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValidationError("Fisher matrix has non-finite entries")
        if numat.max_abs(h - h.T) > SYMMETRY_TOL * max(1.0, numat.max_abs(h)):
            raise ValidationError("Fisher matrix is not symmetric")
        h = 0.5 * (h + h.T)
        low = np.linalg.eigvalsh(h)[0]
        if low < -PSD_SLACK * max(1.0, numat.max_abs(h)):
            raise ValidationError(f"Fisher matrix is not positive semidefinite (eigenvalue {low:.3e})")
        object.__setattr__(self, "H", h)

    @property
    def n(self) -> int:
        return self.H.shape[0]


def qfi_matrix(fam: StateFamily, p, rank_tol: float = RANK_TOL) -> QFIMatrix:
    """``H_mn = Re Tr[rho (L_m L_n + L_n L_m)/2]`` with one SLD per parameter."""
    lam = as_point(p, fam.nparams)
    rho = fam.evaluate(lam)
    slds = [sld_eigen(rho, fam.derivative(lam, mu), rank_tol).op for mu in range(fam.nparams)]
    n = fam.nparams
    h = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            sym = 0.5 * numat.anticommutator(slds[a], slds[b])
            h[a, b] = h[b, a] = numat.expect(rho.rho, sym)
    return QFIMatrix(h)


def qfi_matrix_from_derivatives(fam: StateFamily, p, rank_tol: float = RANK_TOL) -> np.ndarray:
    """``Tr[d_n rho L_m]`` (unsymmetrized); agrees with :func:`qfi_matrix` for exact SLDs."""
    lam = as_point(p, fam.nparams)
    rho = fam.evaluate(lam)
    ders = [fam.derivative(lam, mu) for mu in range(fam.nparams)]
    slds = [sld_eigen(rho, d, rank_tol).op for d in ders]
    return np.array([[numat.trace_product(ders[b], slds[a]).real for b in range(fam.nparams)]
                     for a in range(fam.nparams)])


@dataclass(frozen=True, eq=False)
class CRBResult:
    variances: np.ndarray
    covariance: np.ndarray
    measurements: int
    note: str = MATRIX_BOUND_NOTE


def _inverse(h: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(h)
    top = max(abs(vals[-1]), 0.0)
    if vals[0] <= 0 or top / vals[0] >= MAX_CONDITION:
        null = vecs[:, 0]
        raise SingularFisherError(
            f"Fisher matrix is singular or ill-conditioned (eigenvalues {vals.tolist()}); "
            f"null direction {np.round(null, 12).tolist()}",
            null_direction=null,
        )
    return (vecs / vals) @ vecs.T


def crb_bounds(H: QFIMatrix, measurements: int = 1) -> CRBResult:
    """Per-parameter variance bounds ``(H^-1)_mm / M`` and the full ``H^-1/M``."""
    if measurements < 1:
        raise ValidationError("number of measurements must be at least 1")
    inv = _inverse(H.H) / measurements
    return CRBResult(np.diag(inv).copy(), inv, measurements)


@dataclass(frozen=True, eq=False)
class Reparam:
    """Jacobian ``B[m, n] = d l_n / d l~_m`` of old parameters with respect to new ones."""

    B: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.B, dtype=float))
        if b.shape[0] != b.shape[1] or not np.all(np.isfinite(b)):
            raise ValidationError(f"reparametrization matrix must be finite and square, got {b.shape}")
        object.__setattr__(self, "B", b)

    def inverse(self) -> "Reparam":
        if abs(np.linalg.det(self.B)) < 1e-14 or np.linalg.cond(self.B) > MAX_CONDITION:
            raise SingularFisherError("reparametrization is not invertible")
        return Reparam(np.linalg.inv(self.B))

    @classmethod
    def from_old_of_new(cls, exprs: Sequence[str], new_point, h: float = 1e-5) -> "Reparam":
        """Central-difference Jacobian of ``l(l~)`` given as expressions in ``x1..xN`` (new coordinates)."""
        fs = [Expression(e) for e in exprs]
        x = np.asarray(new_point, dtype=float).reshape(-1)
        return cls(_jacobian(fs, x, h).T)

    @classmethod
    def from_new_of_old(cls, exprs: Sequence[str], old_point, h: float = 1e-5) -> "Reparam":
        """Jacobian from ``l~(l)`` given as expressions in the old coordinates.

        ``B = (J^-1)^T`` with ``J[m, n] = d l~_m / d l_n``.
        """
        fs = [Expression(e) for e in exprs]
        x = np.asarray(old_point, dtype=float).reshape(-1)
        j = _jacobian(fs, x, h)
        return cls(Reparam(j).inverse().B.T)


def _jacobian(fs, x, h):
    n = len(fs)
    if n != x.size:
        raise ValidationError(f"{n} coordinate expressions for {x.size} parameters")
    for f in fs:
        if f.nvars > n:
            raise ValidationError(f"expression {f.source!r} uses more than {n} variables")
    j = np.empty((n, n))
    for b in range(n):
        up = x.copy()
        dn = x.copy()
        up[b] += h
        dn[b] -= h
        for a, f in enumerate(fs):
            j[a, b] = (f(up) - f(dn)) / (2 * h)
    return j


def reparametrize(H: QFIMatrix, B: Reparam) -> QFIMatrix:
    """``H~ = B H B^T``."""
    if B.B.shape != H.H.shape:
        raise ValidationError(f"reparametrization shape {B.B.shape} does not match {H.H.shape}")
    return QFIMatrix(B.B @ H.H @ B.B.T)


def first_coordinate_bound(H_new: QFIMatrix, measurements: int = 1) -> float:
    """``(H~^-1)_11 / M``: bound on the quantity mapped to the first new coordinate."""
    return float(crb_bounds(H_new, measurements).variances[0])
