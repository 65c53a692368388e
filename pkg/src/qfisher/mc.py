"""Monte-Carlo measurement simulation and maximum-likelihood estimation.

Random numbers come from numpy's PCG64 bit generator. Repetition ``r`` of
an experiment with seed ``s`` draws from ``PCG64(SeedSequence([s, r]))``,
so every repetition is reproducible on its own and independent of the
order in which repetitions run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import LikelihoodUndefinedError, NumericalError, ValidationError
from .measure import POVM, born_probs, classical_fisher
from .qfi import qfi_scalar
from .statemodel import StateFamily

RNG_ALGORITHM = f"numpy {np.__version__} PCG64, SeedSequence(entropy=[seed, rep])"
GRID_POINTS = 256
GOLDEN_TOL = 1e-8
SUM_TOL = 1e-8
CLAMP = 1e-12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def substream(seed: int, rep: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(rep)])))


def sample_outcomes(probs, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial outcome counts for ``shots`` independent measurements."""
    p = np.asarray(probs, dtype=float)
    if shots < 0:
        raise ValidationError("shots must be non-negative")
    if p.min() < -CLAMP:
        raise ValidationError(f"negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise ValidationError(f"probabilities sum to {p.sum():.12g}")
    return rng.multinomial(shots, p / p.sum())


class MLEstimate(NamedTuple):
    value: float
    at_boundary: bool


def _loglik(probs: np.ndarray, counts: np.ndarray) -> float:
    hit = counts > 0
    if np.any(probs[hit] <= 0):
        return -math.inf
    return float(np.dot(counts[hit], np.log(probs[hit])))


class _Likelihood:
    """Log-likelihood of outcome counts with the coarse grid precomputed."""

    def __init__(self, fam: StateFamily, povm: POVM, interval, points: int = GRID_POINTS):
        if fam.nparams != 1:
            raise ValidationError("maximum likelihood here supports one-parameter families")
        lo, hi = (float(v) for v in interval)
        if not lo < hi:
            raise ValidationError(f"search interval [{lo}, {hi}] is empty")
        self.fam = fam
        self.povm = povm
        self.lo, self.hi = lo, hi
        self.grid = np.linspace(lo, hi, points)
        self.grid_probs = np.array([self.probs(x) for x in self.grid])

    def probs(self, lam: float) -> np.ndarray:
        return born_probs(self.fam.evaluate(lam), self.povm)

    def __call__(self, lam: float, counts: np.ndarray) -> float:
        return _loglik(self.probs(lam), counts)

    def maximize(self, counts, tol: float = GOLDEN_TOL) -> MLEstimate:
        counts = np.asarray(counts)
        if counts.shape != (len(self.povm),):
            raise ValidationError(f"expected {len(self.povm)} counts, got {counts.shape}")
        grid_ll = np.array([_loglik(p, counts) for p in self.grid_probs])
        if not np.any(np.isfinite(grid_ll)):
            raise LikelihoodUndefinedError(
                "an observed outcome has zero probability at every grid point"
            )
        k = int(np.argmax(grid_ll))
        a = self.grid[max(k - 1, 0)]
        b = self.grid[min(k + 1, len(self.grid) - 1)]
        x, fx = _golden_max(lambda t: self(t, counts), a, b, tol)
        if grid_ll[k] >= fx:
            x, fx = float(self.grid[k]), float(grid_ll[k])
        if x - self.lo <= tol:
            return MLEstimate(self.lo, True)
        if self.hi - x <= tol:
            return MLEstimate(self.hi, True)
        return MLEstimate(float(x), False)


def _golden_max(f, a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _default_interval(fam: StateFamily, interval):
    if interval is not None:
        return interval
    if fam.ranges is None:
        raise ValidationError("no search interval given and the family declares no range")
    return tuple(fam.ranges[0])


def ml_estimate(fam: StateFamily, povm: POVM, counts, interval=None) -> MLEstimate:
    """Maximum-likelihood parameter for observed counts.

    Coarse search on a 256-point grid, then golden-section refinement
    between the neighbours of the best grid point.
    """
    return _Likelihood(fam, povm, _default_interval(fam, interval)).maximize(counts)


@dataclass(frozen=True, eq=False)
class Experiment:
    fam: StateFamily
    true_lambda: float
    povm: POVM
    shots: int
    reps: int
    seed: int
    interval: Optional[tuple] = None

    def __post_init__(self):
        if self.shots < 1 or self.reps < 1:
            raise ValidationError("shots and reps must both be at least 1")
        lo, hi = _default_interval(self.fam, self.interval)
        if not lo < self.true_lambda < hi:
            raise ValidationError(f"true value {self.true_lambda} not inside ({lo}, {hi})")
        object.__setattr__(self, "interval", (float(lo), float(hi)))


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    estimates: np.ndarray
    mean: float
    bias: float
    empirical_var: float
    mse: float
    fisher: float
    qfi: float
    crb_classical: float
    crb_quantum: float
    ratio_to_crb: float
    ratio_to_classical_crb: float
    boundary_hits: int
    rng: str = RNG_ALGORITHM


def crb_experiment(exp: Experiment) -> ExperimentReport:
    """Repeat (sample M outcomes, ML-estimate) R times and compare the spread to the bounds."""
    fam, lam = exp.fam, exp.true_lambda
    probs = born_probs(fam.evaluate(lam), exp.povm)
    f = classical_fisher(fam, exp.povm, lam)
    h = qfi_scalar(fam, lam).H
    like = _Likelihood(fam, exp.povm, exp.interval)

    cache: dict[tuple, MLEstimate] = {}
    estimates = np.empty(exp.reps)
    hits = 0
    for rep in range(exp.reps):
        counts = sample_outcomes(probs, exp.shots, substream(exp.seed, rep))
        key = tuple(int(c) for c in counts)
        if key not in cache:
            cache[key] = like.maximize(counts)
        est = cache[key]
        estimates[rep] = est.value
        hits += est.at_boundary

    mean = float(estimates.mean())
    var = float(estimates.var(ddof=1)) if exp.reps > 1 else 0.0
    crb_c = 1.0 / (exp.shots * f) if f > 0 else math.inf
    crb_q = 1.0 / (exp.shots * h) if h > 0 else math.inf
    if f > h * (1 + 1e-8) + 1e-12:
        raise NumericalError(f"Fisher information {f} exceeds QFI {h}")
    return ExperimentReport(
        estimates=estimates,
        mean=mean,
        bias=mean - lam,
        empirical_var=var,
        mse=float(np.mean((estimates - lam) ** 2)),
        fisher=f,
        qfi=h,
        crb_classical=crb_c,
        crb_quantum=crb_q,
        ratio_to_crb=var / crb_q if math.isfinite(crb_q) else 0.0,
        ratio_to_classical_crb=var / crb_c if math.isfinite(crb_c) else 0.0,
        boundary_hits=hits,
    )
