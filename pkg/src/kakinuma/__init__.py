"""Two-layer interfacial waves in the Kakinuma expansion model on a periodic 1-D domain."""

__version__ = "0.1.0"

from .core import (CanonicalState, Config, Grid1D, Model, ModelParams, State, load_config,
                   integrate, multiply_dealiased, spectral_antiderivative, spectral_derivative)
from .lintheory import (alpha_constant, bordered_det, build_matrices, convergence_order_scan,
                        phase_speed_full, phase_speed_kakinuma, phase_speed_shallow)
from .operators import (Geometry, apply_compat, apply_L1, apply_L2, block_inverse, commutator_f,
                        interface_velocities)
from .elliptic import (EllipticRHS, EllipticSolution, apply_P_operator, prepare_initial_data,
                       solve_compatibility)
from .evolution import (SimConfig, TimeDerivatives, compute_F, compute_time_derivatives,
                        rhs_canonical, simulate, step_rk4)
from .stability import compute_a, frozen_roots, stability_margin
from .diagnostics import (DiagnosticsReport, canonical_phi, energy_density, energy_flux,
                          hamiltonian_value, momentum_and_flux, variational_derivative_check)
