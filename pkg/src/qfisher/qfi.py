"""Scalar quantum Fisher information and the figures of merit built on it."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.integrate
from scipy.optimize import linear_sum_assignment

from . import numat
from .errors import (
    DecompositionMismatchError,
    DegeneracyError,
    QuadratureError,
    ValidationError,
)
from .expr import Expression
from .sld import RANK_TOL, pair_mask, sld_eigen
from .statemodel import (
    DensityMatrix,
    PurePathFamily,
    StateFamily,
    UnitaryFamily,
    as_point,
    validate_state,
)

GAP_TOL = 1e-8
PURITY_TOL = 1e-10
QUAD_ABS_TOL = 1e-8
QUAD_LIMIT = 10**6
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class QFIReport:
    H: float
    method: str = "generic"
    classical_part: Optional[float] = None
    quantum_part: Optional[float] = None


def _single(fam: StateFamily):
    if fam.nparams != 1:
        raise ValidationError(f"scalar QFI needs a one-parameter family, got {fam.nparams}")


def qfi_from_state(rho, drho, rank_tol: float = RANK_TOL) -> float:
    """``H = 2 sum_{mn} |<m|drho|n>|^2 / (r_m + r_n)`` over admitted pairs."""
    state = rho if isinstance(rho, DensityMatrix) else validate_state(rho)
    vals, vecs = state.eig
    mask = pair_mask(vals, rank_tol)
    dm = vecs.conj().T @ np.asarray(drho, dtype=complex) @ vecs
    sums = vals[:, None] + vals[None, :]
    weights = np.divide(2.0, sums, out=np.zeros_like(sums), where=mask)
    return float(np.sum(weights * np.abs(dm) ** 2))


def qfi_scalar(fam: StateFamily, p, rank_tol: float = RANK_TOL) -> QFIReport:
    _single(fam)
    return QFIReport(qfi_from_state(fam.evaluate(p), fam.derivative(p), rank_tol))


def qfi_sld_forms(rho, drho, rank_tol: float = RANK_TOL) -> tuple[float, float]:
    """``(Tr[rho L^2], Tr[drho L])`` with ``L`` from :func:`sld_eigen`."""
    L = sld_eigen(rho, drho, rank_tol).op
    r = np.asarray(rho, dtype=complex)
    return numat.trace_product(r, L, L).real, numat.trace_product(np.asarray(drho), L).real


def qfi_basis_free(rho, drho, rank_tol: float = RANK_TOL) -> float:
    """``2 int_0^inf Tr[drho e^{-rho t} drho e^{-rho t}] dt`` via spectral projectors.

    Each eigenvalue pair contributes ``Tr[drho P_j drho P_k] / (r_j + r_k)``;
    this sums over projector pairs rather than matrix elements.
    """
    state = rho if isinstance(rho, DensityMatrix) else validate_state(rho)
    vals, vecs = state.eig
    d = np.asarray(drho, dtype=complex)
    projs = [numat.projector(vecs[:, k]) for k in range(state.dim)]
    total = 0.0
    for j, pj in enumerate(projs):
        for k, pk in enumerate(projs):
            s = vals[j] + vals[k]
            if s > rank_tol:
                total += 2.0 * numat.trace_product(d, pj, d, pk).real / s
    return total


def _matched_eigensystem(ref_vecs, vals, vecs):
    """Reorder ``(vals, vecs)`` to follow ``ref_vecs`` and fix phases."""
    overlap = np.abs(ref_vecs.conj().T @ vecs)
    _, cols = linear_sum_assignment(-overlap)
    vals = vals[cols]
    vecs = vecs[:, cols]
    phases = np.einsum("ak,ak->k", ref_vecs.conj(), vecs)
    vecs = vecs * (np.abs(phases) / np.where(phases == 0, 1, phases))
    return vals, vecs


def qfi_decomposed(fam: StateFamily, p, rank_tol: float = RANK_TOL,
                   sigma: Callable | None = None) -> QFIReport:
    """Split ``H`` into eigenvalue (classical) and eigenvector (quantum) parts.

    Eigenvalue and eigenvector derivatives come from central differences of
    the spectrum, with eigenvectors matched by overlap and phase-aligned to
    the centre point. ``sigma(r_n, r_m)`` overrides the weight used in the
    quantum part; the default is ``(r_n - r_m)^2 / (r_n + r_m)``.
    """
    _single(fam)
    lam = as_point(p, 1)
    state = fam.evaluate(lam)
    vals, vecs = state.eig
    gaps = np.diff(vals)
    if gaps.size and gaps.min() <= GAP_TOL:
        raise DegeneracyError(
            f"spectrum is degenerate (min gap {gaps.min():.3e}); decomposition is ill-defined"
        )
    h = fam.step
    vp, up = _matched_eigensystem(vecs, *fam.evaluate(lam + h).eig)
    vm, um = _matched_eigensystem(vecs, *fam.evaluate(lam - h).eig)
    dvals = (vp - vm) / (2 * h)
    dvecs = (up - um) / (2 * h)

    support = vals > rank_tol
    classical = float(np.sum(dvals[support] ** 2 / vals[support]))

    # c[m, n] = <psi_m | d psi_n>
    c = vecs.conj().T @ dvecs
    rn = vals[None, :]
    rm = vals[:, None]
    mask = pair_mask(vals, rank_tol) & ~np.eye(len(vals), dtype=bool)
    if sigma is None:
        weights = np.divide((rn - rm) ** 2, rn + rm, out=np.zeros((len(vals),) * 2),
                            where=mask)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = sigma(np.broadcast_to(rn, mask.shape), np.broadcast_to(rm, mask.shape))
        weights = np.where(mask, raw, 0.0)
    quantum = float(2.0 * np.sum(weights * np.abs(c) ** 2))

    total = qfi_from_state(state, fam.derivative(lam), rank_tol)
    if abs(classical + quantum - total) > 1e-6 * max(1.0, total):
        raise DecompositionMismatchError(
            f"classical {classical:.12g} + quantum {quantum:.12g} != H {total:.12g}"
        )
    return QFIReport(classical + quantum, "decomposed", classical, quantum)


def qfi_pure(fam: PurePathFamily, p) -> QFIReport:
    """``H = 4 [<dpsi|dpsi> + <dpsi|psi>^2]`` for a pure-state path."""
    if not isinstance(fam, PurePathFamily):
        raise ValidationError("qfi_pure requires a pure_path family")
    _single(fam)
    psi = fam.state_vector(p)
    dpsi = fam.vector_derivative(p)
    overlap = np.vdot(dpsi, psi)
    value = 4.0 * (np.vdot(dpsi, dpsi).real + (overlap**2).real)
    return QFIReport(float(value), "pure")


def qfi_unitary(fam: UnitaryFamily) -> QFIReport:
    """Parameter-independent QFI of ``exp(-i l G) rho0 exp(i l G)``.

    Pure ``rho0``: four times the variance of ``G``. Mixed: the
    ``2 sum sigma_nm |G_nm|^2`` form in the eigenbasis of ``rho0``.
    """
    if not isinstance(fam, UnitaryFamily):
        raise ValidationError("qfi_unitary requires a unitary family")
    g = fam.generator
    vals, vecs = fam.rho0.eig
    if vals[-1] > 1.0 - PURITY_TOL:
        psi = vecs[:, -1]
        mean = np.vdot(psi, g @ psi).real
        second = np.vdot(psi, g @ (g @ psi)).real
        return QFIReport(4.0 * (second - mean**2), "unitary")
    gm = vecs.conj().T @ g @ vecs
    rn = vals[:, None]
    rm = vals[None, :]
    mask = pair_mask(vals, RANK_TOL)
    sig = np.divide((rn - rm) ** 2, rn + rm, out=np.zeros_like(rn * rm), where=mask)
    value = 2.0 * float(np.sum(sig * np.abs(gm) ** 2))
    return QFIReport(value, "unitary")


def qfi_unitary_mixed_form(fam: UnitaryFamily) -> float:
    """The variance-plus-correction expression for a mixed initial state.

    ``4 Tr[dG^2 rho0] + 4 sum_n r_n <n| <G>^2 - 2 G K_n G |n>`` with
    ``K_n = sum_m r_m / (r_n + r_m) |m><m|``. Pairs with ``r_n + r_m = 0``
    are left out of ``K_n``. Provided for numerical comparison only.
    """
    g = fam.generator
    r0 = fam.rho0.rho
    vals, vecs = fam.rho0.eig
    mean = numat.expect(r0, g)
    var = numat.expect(r0, g @ g) - mean**2
    corr = 0.0
    for n in range(len(vals)):
        sums = vals[n] + vals
        coeff = np.divide(vals, sums, out=np.zeros_like(vals), where=sums > RANK_TOL)
        k_n = (vecs * coeff) @ vecs.conj().T
        phi = vecs[:, n]
        corr += vals[n] * (mean**2 - 2.0 * np.vdot(phi, g @ k_n @ g @ phi).real)
    return 4.0 * var + 4.0 * corr


def generator_variance(fam: UnitaryFamily) -> float:
    r0 = fam.rho0.rho
    g = fam.generator
    return numat.expect(r0, g @ g) - numat.expect(r0, g) ** 2


def uncertainty_bound(fam: UnitaryFamily, measurements: int = 1) -> float:
    """Lower bound on ``Var(l) <dG^2>`` implied by the quantum Cramer-Rao bound.

    Equals ``1/(4M)`` for a pure initial state and is smaller when mixing
    adds a classical contribution.
    """
    h = qfi_unitary(fam).H
    if h <= 0:
        return math.inf
    return generator_variance(fam) / (measurements * h)


@dataclass(frozen=True)
class Estimability:
    """Quantum signal-to-noise ratio and the sample size it implies."""

    Q: float

    def measurements(self, delta: float) -> float:
        """Measurements for a 3-sigma relative error ``delta`` (``inf`` if ``Q == 0``)."""
        if not delta > 0:
            raise ValidationError(f"relative error must be positive, got {delta}")
        if self.Q <= 0:
            return math.inf
        raw = 9.0 / (delta**2 * self.Q)
        # shave the last few ulps so 2700.0000000000005 rounds to 2700
        return float(math.ceil(raw * (1.0 - 1e-12)))


def estimability(lam: float, H: float) -> Estimability:
    if H < 0:
        raise ValidationError(f"Fisher information must be non-negative, got {H}")
    return Estimability(float(lam) ** 2 * H if lam != 0 and H != 0 else 0.0)


@dataclass(frozen=True)
class Prior:
    """Prior density ``z`` on ``[a, b]`` given as an expression in ``x``."""

    density: Expression
    a: float
    b: float

    @classmethod
    def from_expression(cls, src: str, a: float, b: float) -> "Prior":
        expr = Expression(src)
        if expr.nvars > 1:
            raise ValidationError("prior density may only depend on x")
        if not a < b:
            raise ValidationError(f"prior support [{a}, {b}] is empty")
        prior = cls(expr, float(a), float(b))
        prior.validate()
        return prior

    def __call__(self, lam: float) -> float:
        return self.density((lam,))

    def validate(self) -> None:
        grid = np.linspace(self.a, self.b, 1001)
        low = min(self(x) for x in grid)
        if low < 0:
            raise ValidationError(f"prior density is negative somewhere on [{self.a}, {self.b}] (min {low:.3e})")
        total = _quad(self, self.a, self.b, "prior normalization")
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"prior integrates to {total:.9g}, not 1")

    def derivative(self, lam: float, h: float = 1e-5) -> float:
        # one-sided second-order stencils at the support edges
        if lam - h < self.a:
            return (-3 * self(lam) + 4 * self(lam + h) - self(lam + 2 * h)) / (2 * h)
        if lam + h > self.b:
            return (3 * self(lam) - 4 * self(lam - h) + self(lam - 2 * h)) / (2 * h)
        return (self(lam + h) - self(lam - h)) / (2 * h)

    def fisher_density(self, lam: float) -> float:
        """``z (d log z)^2 = z'^2 / z``."""
        z = self(lam)
        dz = self.derivative(lam)
        if z <= 0:
            if dz == 0:
                return 0.0
            raise QuadratureError(f"prior vanishes at {lam:.6g} with nonzero slope; prior information diverges")
        return dz * dz / z


def _quad(f, a, b, what):
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
        try:
            value, _ = scipy.integrate.quad(f, a, b, epsabs=QUAD_ABS_TOL, limit=QUAD_LIMIT)
        except scipy.integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature failed for {what}: {exc}") from None
    if not math.isfinite(value):
        raise QuadratureError(f"quadrature for {what} is not finite")
    return value


@dataclass(frozen=True)
class VanTrees:
    Z_F: float
    Z_H: float
    bound: float
    prior_information: float


def van_trees(fam: StateFamily, prior: Prior, measurements: int, povm=None) -> VanTrees:
    """Bayesian bound on the prior-averaged variance.

    ``Z = M int z F + int z (d log z)^2``; ``Z_H`` uses the QFI, ``Z_F`` the
    Fisher information of ``povm`` (or the QFI when no POVM is given).
    """
    _single(fam)
    if measurements < 1:
        raise ValidationError("number of measurements must be at least 1")
    prior_info = _quad(prior.fisher_density, prior.a, prior.b, "prior information")
    avg_h = _quad(lambda x: prior(x) * qfi_scalar(fam, x).H, prior.a, prior.b, "averaged QFI")
    z_h = measurements * avg_h + prior_info
    if povm is None:
        z_f = z_h
    else:
        from .measure import classical_fisher

        avg_f = _quad(lambda x: prior(x) * classical_fisher(fam, povm, x),
                      prior.a, prior.b, "averaged Fisher information")
        z_f = measurements * avg_f + prior_info
    return VanTrees(z_f, z_h, 1.0 / z_h, prior_info)
