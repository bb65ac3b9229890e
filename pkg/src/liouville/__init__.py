"""Action-angle data for 1-DOF Hamiltonians in generic standard form.

Computes and cross-validates actions, energy functions, near-critical
log-singular representations, Birkhoff normal forms, analyticity windows,
and convexity profiles, with a pendulum elliptic-integral oracle as the
independent reference route.
"""

__version__ = "0.1.0"

from .action_map import action, build_action_table, dIdE, energy_of_action, \
    period
from .normal_form import birkhoff_normalize
from .potential import PeriodicPotential, morse_profile
from .separatrix import fit_singular_rep, separatrix_samples
from .standard_form import make_standard_form, pendulum_standard_form, \
    standardize, validate_standard_form

__all__ = [
    "__version__",
    "PeriodicPotential", "morse_profile",
    "make_standard_form", "pendulum_standard_form", "standardize",
    "validate_standard_form",
    "action", "dIdE", "period", "energy_of_action", "build_action_table",
    "separatrix_samples", "fit_singular_rep",
    "birkhoff_normalize",
]
