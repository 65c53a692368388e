"""Dense complex matrix kernel.

Every routine here is a pure function of its inputs. Hermitian inputs are
checked against an absolute tolerance and then symmetrized, so round-off
asymmetry never leaks into an eigensolver.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, HermiticityError, ValidationError

HERMITIAN_TOL = 1e-10
CLAMP_TOL = 1e-12
MAX_DIM = 64


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def as_square(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite square complex array or raise."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[0] > MAX_DIM:
        raise ValidationError(f"{name} dimension {arr.shape[0]} outside 1..{MAX_DIM}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def hermitian_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def hermitize(a, tol: float = HERMITIAN_TOL, name: str = "matrix") -> np.ndarray:
    """Check Hermiticity within ``tol`` and return ``(A + A^dag)/2``."""
    arr = as_square(a, name)
    defect = hermitian_defect(arr)
    if defect > tol:
        raise HermiticityError(defect, tol)
    return 0.5 * (arr + arr.conj().T)


def eigh(a, tol: float = HERMITIAN_TOL) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    herm = hermitize(a, tol)
    values, vectors = np.linalg.eigh(herm)
    return EigenSystem(values, vectors)


def clamp_spectrum(values: np.ndarray, tol: float = CLAMP_TOL) -> np.ndarray:
    """Zero out eigenvalues in ``[-tol, 0)``; leave everything else alone."""
    out = values.copy()
    out[(out < 0) & (out >= -tol)] = 0.0
    return out


def mat_func(a, f: Callable[[np.ndarray], np.ndarray], tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Apply a real scalar function to a Hermitian matrix through its spectrum.

    Eigenvalues in ``[-1e-12, 0)`` are treated as zero first. If ``f``
    produces a non-finite value on the (clamped) spectrum a
    :class:`DomainError` is raised naming the offending eigenvalue.
    """
    es = eigh(a, tol)
    vals = clamp_spectrum(es.values)
    with np.errstate(all="ignore"):
        fvals = np.asarray(f(vals))
    bad = ~np.isfinite(fvals)
    if np.any(bad):
        raise DomainError(
            f"function undefined at eigenvalue {vals[bad][0]:.6e}"
        )
    return (es.vectors * fvals) @ es.vectors.conj().T


def sqrtm_psd(a, cutoff: float = 0.0) -> np.ndarray:
    """Principal square root of a PSD matrix.

    Eigenvalues below ``cutoff`` (after clamping) are mapped to zero.
    """
    def root(v):
        return np.where(v <= cutoff, 0.0, np.sqrt(v))

    return mat_func(a, root)


def trace_product(*mats: np.ndarray) -> complex:
    """Tr[A1 A2 ... An] without forming more than n-2 products."""
    if not mats:
        raise ValueError("trace_product needs at least one matrix")
    if len(mats) == 1:
        return complex(np.trace(mats[0]))
    left = mats[0]
    for m in mats[1:-1]:
        left = left @ m
    # Tr[XY] = sum_ij X_ij Y_ji
    return complex(np.sum(left * mats[-1].T))


def expect(rho: np.ndarray, op: np.ndarray) -> float:
    """Re Tr[rho op]."""
    return trace_product(rho, op).real


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())
