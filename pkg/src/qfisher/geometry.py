"""Fidelity, Bures distance and a finite-difference check of the Bures metric."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numat
from .errors import ValidationError
from .statemodel import DensityMatrix, StateFamily, as_point, validate_state

# Eigenvalues this small are numerically indistinguishable from zero for a
# unit-trace state; taking their square root would inject ~1e-8 noise.
SQRT_CUTOFF = 1e-12
REL_FLOOR = 1e-12
RANK_TOL = 1e-10


def _state(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else validate_state(rho)


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``, clipped to ``[0, 1]``."""
    r = _state(rho)
    s = _state(sigma)
    if r.dim != s.dim:
        raise ValidationError(f"states have different dimensions ({r.dim}, {s.dim})")
    root = numat.sqrtm_psd(r.rho, SQRT_CUTOFF)
    inner = root @ s.rho @ root
    vals = numat.clamp_spectrum(np.linalg.eigvalsh(0.5 * (inner + inner.conj().T)))
    f = float(np.sum(np.sqrt(np.where(vals > SQRT_CUTOFF, vals, 0.0)))) ** 2
    return min(max(f, 0.0), 1.0)


def bures_distance_sq(rho, sigma) -> float:
    return 2.0 * (1.0 - float(np.sqrt(fidelity(rho, sigma))))


@dataclass(frozen=True)
class BuresReport:
    fidelity: float
    bures_sq: float
    metric_fd: float
    qfi_quarter: float
    rel_err: float
    metric_step: float = 0.0
    metric_half_step: float = 0.0
    warnings: tuple = field(default=())


def bures_metric_check(fam: StateFamily, p, step: float = 1e-3, mu: int = 0) -> BuresReport:
    """Compare ``D_B^2(rho_l, rho_{l+s})/s^2`` against a quarter of the QFI.

    The one-sided quotient is evaluated at ``s`` and ``s/2`` and combined
    by Richardson extrapolation (``2 m(s/2) - m(s)``). For a multiparameter
    family the displacement is along parameter ``mu`` and the diagonal QFI
    matrix entry is used.
    """
    from .multiparam import qfi_matrix

    if not 1e-6 <= step <= 1e-2:
        raise ValidationError(f"step {step} outside [1e-6, 1e-2]")
    lam = as_point(p, fam.nparams)
    if not 0 <= mu < fam.nparams:
        raise ValidationError(f"parameter index {mu} out of range")
    shift = np.zeros(fam.nparams)
    shift[mu] = 1.0
    rho = fam.evaluate(lam)
    far = fam.evaluate(lam + step * shift)
    near = fam.evaluate(lam + 0.5 * step * shift)

    f_far = fidelity(rho, far)
    d_far = 2.0 * (1.0 - float(np.sqrt(f_far)))
    d_near = bures_distance_sq(rho, near)
    m_far = d_far / step**2
    m_near = d_near / (0.5 * step) ** 2
    metric = 2.0 * m_near - m_far

    quarter = float(qfi_matrix(fam, lam).H[mu, mu]) / 4.0
    rel = abs(metric - quarter) / max(quarter, REL_FLOOR)

    notes = []
    ranks = {rho.rank(RANK_TOL), near.rank(RANK_TOL), far.rank(RANK_TOL)}
    if len(ranks) > 1:
        notes.append(
            f"state rank changes within [{lam[mu]:.6g}, {lam[mu] + step:.6g}]; "
            "metric/QFI agreement is not expected at a support boundary"
        )
    return BuresReport(f_far, d_far, metric, quarter, rel, m_far, m_near, tuple(notes))
