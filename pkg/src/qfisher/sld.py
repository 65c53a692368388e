"""Symmetric logarithmic derivative.

The SLD ``L`` solves ``(L rho + rho L)/2 = d rho``. It is computed here by
two independently coded routes (an eigenbasis kernel and the integral
representation reduced in closed form) plus a structural shortcut for
unitary families.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import numat
from .errors import DegenerateSupportError, SupportError, ValidationError
from .statemodel import DensityMatrix, UnitaryFamily, as_point, validate_state

RANK_TOL = 1e-10
TRACELESS_TOL = 1e-8
FULL_RANK_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SLDOperator:
    op: np.ndarray
    support_rank: int
    rank_tol: float = RANK_TOL

    def __array__(self, dtype=None, copy=None):
        return self.op if dtype is None else self.op.astype(dtype)


def _state(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else validate_state(rho)


def _check_drho(drho, dim: int) -> np.ndarray:
    d = numat.hermitize(drho, numat.HERMITIAN_TOL, "state derivative")
    if d.shape[0] != dim:
        raise ValidationError(f"derivative has dimension {d.shape[0]}, state has {dim}")
    tr = abs(np.trace(d))
    if tr > TRACELESS_TOL:
        raise ValidationError(f"state derivative must be traceless, trace is {tr:.3e}")
    return d


def pair_mask(values: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Boolean matrix of eigenvalue pairs whose sum exceeds ``rank_tol``."""
    return (values[:, None] + values[None, :]) > rank_tol


def sld_eigen(rho, drho, rank_tol: float = RANK_TOL) -> SLDOperator:
    """SLD from the eigenbasis of ``rho``.

    ``L = 2 sum_{mn} <m|drho|n> / (r_m + r_n) |m><n|`` over pairs with
    ``r_m + r_n > rank_tol``; the remaining block is set to zero.
    """
    state = _state(rho)
    d = _check_drho(drho, state.dim)
    vals, vecs = state.eig
    mask = pair_mask(vals, rank_tol)
    if not mask.any():
        raise DegenerateSupportError("state has no eigenvalue pair above rank tolerance")
    dm = vecs.conj().T @ d @ vecs
    sums = vals[:, None] + vals[None, :]
    kernel = np.divide(2.0, sums, out=np.zeros_like(sums), where=mask)
    op = vecs @ (kernel * dm) @ vecs.conj().T
    op = 0.5 * (op + op.conj().T)
    return SLDOperator(op, int(np.sum(vals > rank_tol)), rank_tol)


def sld_integral(rho, drho) -> SLDOperator:
    """SLD from ``L = 2 int_0^inf exp(-rho t) drho exp(-rho t) dt``.

    Requires a strictly positive state. With ``rho = sum_k r_k P_k`` the
    integrand is ``sum_{jk} exp(-(r_j + r_k) t) P_j drho P_k`` and each time
    integral is the Laplace transform of an exponential at zero, giving a
    weighted sum of spectral-projector sandwiches.
    """
    state = _state(rho)
    d = _check_drho(drho, state.dim)
    # separate LAPACK driver from numat.eigh on purpose
    vals, vecs = scipy.linalg.eigh(state.rho, driver="evr")
    if vals[0] <= FULL_RANK_TOL:
        raise SupportError(
            f"integral form needs a full-rank state (min eigenvalue {vals[0]:.3e}); use sld_eigen"
        )
    # d_jk = <j|drho|k>; laplace[j, k] = int_0^inf exp(-(r_j + r_k) t) dt
    d_jk = np.einsum("aj,ab,bk->jk", vecs.conj(), d, vecs)
    laplace = 1.0 / np.add.outer(vals, vals)
    op = 2.0 * np.einsum("aj,jk,bk->ab", vecs, laplace * d_jk, vecs.conj())
    op = 0.5 * (op + op.conj().T)
    return SLDOperator(op, state.dim, 0.0)


def lyapunov_residual(sld, rho, drho, rank_tol: float | None = None) -> float:
    """Max-entry norm of ``(L rho + rho L)/2 - drho`` on the support of ``rho``.

    The block of the residual between two eigenvectors of ``rho`` whose
    eigenvalue sum is below tolerance is discarded, since the SLD equation
    places no constraint there.
    """
    state = _state(rho)
    L = np.asarray(sld.op if isinstance(sld, SLDOperator) else sld, dtype=complex)
    tol = rank_tol if rank_tol is not None else (
        sld.rank_tol if isinstance(sld, SLDOperator) and sld.rank_tol > 0 else RANK_TOL
    )
    r = 0.5 * numat.anticommutator(L, state.rho) - np.asarray(drho, dtype=complex)
    vals, vecs = state.eig
    rm = vecs.conj().T @ r @ vecs
    rm[~pair_mask(vals, tol)] = 0.0
    return numat.max_abs(vecs @ rm @ vecs.conj().T)


def support_projector(rho, rank_tol: float = RANK_TOL) -> np.ndarray:
    vals, vecs = _state(rho).eig
    keep = vecs[:, vals > rank_tol]
    return keep @ keep.conj().T


def sld_unitary(fam: UnitaryFamily, p, rank_tol: float = RANK_TOL) -> SLDOperator:
    """``L = U L0 U^dag`` with ``L0`` built from the generator and the spectrum of rho0.

    In the eigenbasis of rho0, ``L0_mn = 2i G_mn (r_m - r_n)/(r_m + r_n)``.
    """
    if not isinstance(fam, UnitaryFamily):
        raise ValidationError("sld_unitary requires a unitary family")
    lam = as_point(p, 1)
    vals, vecs = fam.rho0.eig
    mask = pair_mask(vals, rank_tol)
    if not mask.any():
        raise DegenerateSupportError("initial state has no eigenvalue pair above rank tolerance")
    g = vecs.conj().T @ fam.generator @ vecs
    diff = vals[:, None] - vals[None, :]
    sums = vals[:, None] + vals[None, :]
    ratio = np.divide(diff, sums, out=np.zeros_like(sums), where=mask)
    l0 = vecs @ (2j * g * ratio) @ vecs.conj().T
    u = fam.unitary(lam[0])
    op = u @ l0 @ u.conj().T
    op = 0.5 * (op + op.conj().T)
    return SLDOperator(op, int(np.sum(vals > rank_tol)), rank_tol)


def sld(fam, p, mu: int = 0, rank_tol: float = RANK_TOL) -> SLDOperator:
    """SLD of ``fam`` at ``p`` with respect to parameter ``mu`` (eigen route)."""
    return sld_eigen(fam.evaluate(p), fam.derivative(p, mu), rank_tol)
