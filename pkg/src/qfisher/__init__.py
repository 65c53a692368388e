"""Quantum Fisher information, Cramer-Rao bounds and optimal measurements for finite-dimensional models."""
from ._version import __version__
from .errors import NumericalError, QFisherError, ValidationError
from .geometry import bures_distance_sq, bures_metric_check, fidelity
from .measure import POVM, born_probs, classical_fisher, optimal_estimator, optimal_povm
from .modelfile import bundled, load_family, load_povm, load_prior
from .multiparam import QFIMatrix, Reparam, crb_bounds, qfi_matrix, reparametrize
from .qfi import estimability, qfi_decomposed, qfi_pure, qfi_scalar, qfi_unitary, van_trees
from .sld import lyapunov_residual, sld_eigen, sld_integral
from .statemodel import DensityMatrix, StateFamily, validate_state


__all__ = [
    "DensityMatrix", "NumericalError", "POVM", "QFIMatrix", "QFisherError", "Reparam",
    "StateFamily", "ValidationError", "born_probs", "bundled", "bures_distance_sq",
    "bures_metric_check", "classical_fisher", "crb_bounds", "estimability", "fidelity",
    "load_family", "load_povm", "load_prior", "lyapunov_residual", "optimal_estimator",
    "optimal_povm", "qfi_decomposed", "qfi_matrix", "qfi_pure", "qfi_scalar", "qfi_unitary",
    "reparametrize", "sld_eigen", "sld_integral", "validate_state", "van_trees",
]
