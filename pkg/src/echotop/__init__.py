"""Fidelity decay of the integrable kicked top under residual perturbations."""
from .spin import (
    SpinParameters, TopParameters, build_angular_momentum, build_unperturbed, build_kick,
    apply_unperturbed, apply_kick, apply_perturbed,
)
from .states import QuantumState, coherent_state, random_state, random_ensemble, structure_function
from .echo import FidelityTrace, EnsembleTrace, run_fidelity, run_fidelity_ensemble, run_fidelity_spectral
from .semiclassics import IntegrableModel, TheoryBundle, timescales

__version__ = "0.1.0"
