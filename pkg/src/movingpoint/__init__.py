"""Three-dimensional Schrodinger operator with a point interaction moving along a trajectory."""

from .errors import NumericalGuardError
from .forms import DecomposedState, charge_extract, form_f_alpha0, form_fv_alpha, form_qv
from .grid import GridSpec, WaveField, gaussian_state, translate
from .hamiltonian import DriftHamiltonian, PointInteractionOperator, krein_resolvent_apply
from .kernels import DECOUPLED
from .propagator import PropagatorConfig, Trajectory, evolve_comoving, evolve_lab
from .spectrum import SpectrumReport, bound_state_energy, gamma_root

__all__ = [
    "DECOUPLED",
    "DecomposedState",
    "DriftHamiltonian",
    "GridSpec",
    "NumericalGuardError",
    "PointInteractionOperator",
    "PropagatorConfig",
    "SpectrumReport",
    "Trajectory",
    "WaveField",
    "bound_state_energy",
    "charge_extract",
    "evolve_comoving",
    "evolve_lab",
    "form_f_alpha0",
    "form_fv_alpha",
    "form_qv",
    "gamma_root",
    "gaussian_state",
    "krein_resolvent_apply",
    "translate",
]
