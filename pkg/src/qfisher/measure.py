"""POVMs, Born-rule probabilities, classical Fisher information and optimal measurements."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from . import numat
from .errors import NoInformationError, NumericalError, ValidationError
from .qfi import qfi_from_state
from .sld import RANK_TOL, sld_eigen
from .statemodel import StateFamily, as_point

ELEMENT_TOL = 1e-10
COMPLETENESS_TOL = 1e-8
PROB_FLOOR = 1e-12
MERGE_TOL = 1e-8


class SkippedOutcomeWarning(UserWarning):
    """An outcome with vanishing probability but nonzero slope was left out."""


@dataclass(frozen=True, eq=False)
class POVM:
    elements: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        if not self.elements:
            raise ValidationError("a POVM needs at least one element")
        elems = []
        for i, e in enumerate(self.elements):
            h = numat.hermitize(e, numat.HERMITIAN_TOL, f"POVM element {i}")
            low = np.linalg.eigvalsh(h)[0]
            if low < -ELEMENT_TOL:
                raise ValidationError(f"POVM element {i} is not positive (eigenvalue {low:.3e})")
            elems.append(h)
        d = elems[0].shape[0]
        if any(e.shape != (d, d) for e in elems):
            raise ValidationError("POVM elements have different dimensions")
        dev = numat.max_abs(sum(elems) - np.eye(d))
        if dev > COMPLETENESS_TOL:
            raise ValidationError(f"POVM elements do not sum to identity (deviation {dev:.3e})")
        labels = tuple(self.labels) or tuple(str(i) for i in range(len(elems)))
        if len(labels) != len(elems):
            raise ValidationError("POVM needs one label per element")
        object.__setattr__(self, "elements", tuple(elems))
        object.__setattr__(self, "labels", tuple(str(x) for x in labels))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    @classmethod
    def computational(cls, dim: int) -> "POVM":
        return cls.from_basis(np.eye(dim))

    @classmethod
    def from_basis(cls, vectors, labels=()) -> "POVM":
        """Rank-one projectors onto the columns of ``vectors``."""
        v = np.asarray(vectors, dtype=complex)
        return cls(tuple(numat.projector(v[:, k]) for k in range(v.shape[1])), tuple(labels))


def born_probs(rho, povm: POVM) -> np.ndarray:
    """``p_x = Tr[Pi_x rho]`` with round-off negatives clamped to zero."""
    r = np.asarray(rho, dtype=complex)
    if r.shape != (povm.dim, povm.dim):
        raise ValidationError(f"state dimension {r.shape[0]} does not match POVM dimension {povm.dim}")
    probs = np.array([numat.expect(r, e) for e in povm.elements])
    if probs.min() < -PROB_FLOOR:
        raise NumericalError(f"negative outcome probability {probs.min():.3e}")
    probs[probs < 0] = 0.0
    if abs(probs.sum() - 1.0) > COMPLETENESS_TOL:
        raise NumericalError(f"outcome probabilities sum to {probs.sum():.12g}")
    return probs


def probability_slopes(drho, povm: POVM) -> np.ndarray:
    d = np.asarray(drho, dtype=complex)
    return np.array([numat.expect(d, e) for e in povm.elements])


def fisher_from_probs(probs, slopes, labels=None) -> float:
    """``sum_x (dp_x)^2 / p_x`` over outcomes with ``p_x > 1e-12``.

    Outcomes below the floor are skipped; if any of them has a nonzero
    slope a :class:`SkippedOutcomeWarning` names it.
    """
    probs = np.asarray(probs, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    keep = probs > PROB_FLOOR
    if not keep.any():
        raise NumericalError("every outcome probability is below 1e-12")
    dropped = np.flatnonzero(~keep & (np.abs(slopes) > PROB_FLOOR))
    if dropped.size:
        names = [labels[i] if labels else str(i) for i in dropped]
        warnings.warn(
            f"outcomes {names} have vanishing probability but nonzero slope; excluded from Fisher information",
            SkippedOutcomeWarning,
            stacklevel=3,
        )
    return float(np.sum(slopes[keep] ** 2 / probs[keep]))


def classical_fisher(fam: StateFamily, povm: POVM, p) -> float:
    if fam.nparams != 1:
        raise ValidationError("classical_fisher needs a one-parameter family; use classical_fisher_matrix")
    rho = fam.evaluate(p)
    return fisher_from_probs(born_probs(rho, povm), probability_slopes(fam.derivative(p), povm),
                             povm.labels)


def classical_fisher_matrix(fam: StateFamily, povm: POVM, p) -> np.ndarray:
    rho = fam.evaluate(p)
    probs = born_probs(rho, povm)
    slopes = np.array([probability_slopes(fam.derivative(p, mu), povm) for mu in range(fam.nparams)])
    keep = probs > PROB_FLOOR
    s = slopes[:, keep]
    return (s / probs[keep]) @ s.T


def spectral_projectors(op, merge_tol: float = MERGE_TOL) -> tuple[list[np.ndarray], list[float]]:
    """Eigenprojectors of a Hermitian operator, merging eigenvalues closer than ``merge_tol``."""
    vals, vecs = numat.eigh(op)
    groups: list[list[int]] = [[0]]
    for k in range(1, len(vals)):
        if vals[k] - vals[groups[-1][-1]] <= merge_tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    projs = []
    evs = []
    for g in groups:
        v = vecs[:, g]
        projs.append(v @ v.conj().T)
        evs.append(float(np.mean(vals[g])))
    return projs, evs


def optimal_povm(fam: StateFamily, p, rank_tol: float = RANK_TOL) -> POVM:
    """Projective measurement onto the eigenspaces of the SLD.

    A vanishing SLD yields the single-element POVM ``{I}``.
    """
    if fam.nparams != 1:
        raise ValidationError("optimal_povm needs a one-parameter family")
    L = sld_eigen(fam.evaluate(p), fam.derivative(p), rank_tol).op
    projs, evs = spectral_projectors(L)
    return POVM(tuple(projs), tuple(f"L={v:.12g}" for v in evs))


def saturation_defect(rho, povm: POVM, sld) -> float:
    """Largest ``|Im Tr[rho Pi_x L]|``; zero when the first Fisher inequality is tight."""
    r = np.asarray(rho, dtype=complex)
    L = np.asarray(sld, dtype=complex)
    return max(abs(numat.trace_product(r, e, L).imag) for e in povm.elements)


@dataclass(frozen=True, eq=False)
class EstimatorOp:
    op: np.ndarray
    at_lambda: float
    H: float


def optimal_estimator(fam: StateFamily, p, rank_tol: float = RANK_TOL) -> EstimatorOp:
    """``O = l I + L / H``: unbiased at ``l`` with variance ``1/H``."""
    if fam.nparams != 1:
        raise ValidationError("optimal_estimator needs a one-parameter family")
    lam = as_point(p, 1)
    rho = fam.evaluate(lam)
    drho = fam.derivative(lam)
    h = qfi_from_state(rho, drho, rank_tol)
    if h <= 1e-12:
        raise NoInformationError(f"QFI {h:.3e} vanishes; no locally unbiased estimator exists")
    L = sld_eigen(rho, drho, rank_tol).op
    return EstimatorOp(lam[0] * np.eye(fam.dim) + L / h, float(lam[0]), h)


def estimator_moments(rho, est: EstimatorOp) -> tuple[float, float]:
    """Mean and variance of the estimator observable in ``rho``."""
    r = np.asarray(rho, dtype=complex)
    mean = numat.expect(r, est.op)
    second = numat.expect(r, est.op @ est.op)
    return mean, second - mean**2


def random_povm(dim: int, seed: int, kind: str = "rotated", outcomes: int | None = None) -> POVM:
    """Seeded random POVM.

    ``rotated``: rank-one projectors onto a Haar-random basis.
    ``binned``: a Haar-random basis coarse-grained into ``outcomes`` bins.
    ``general``: ``outcomes`` random positive operators normalized to sum to I.
    """
    rng = np.random.default_rng(seed)
    if kind == "rotated":
        u = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.eye(1)
        return POVM.from_basis(u)
    if kind == "binned":
        u = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.eye(1)
        n = outcomes or max(1, dim - 1)
        labels = rng.integers(0, n, size=dim)
        elems = []
        for b in range(n):
            cols = u[:, labels == b]
            if cols.shape[1]:
                elems.append(cols @ cols.conj().T)
        return POVM(tuple(elems))
    if kind == "general":
        n = outcomes or dim + 2
        raw = []
        for _ in range(n):
            a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            raw.append(a @ a.conj().T)
        s_inv_half = numat.mat_func(sum(raw), lambda v: 1.0 / np.sqrt(v))
        return POVM(tuple(s_inv_half @ e @ s_inv_half for e in raw))
    raise ValidationError(f"unknown random POVM kind {kind!r}")
