"""Energy-stable continuous Galerkin SBP-SAT operators with Galerkin-weighted artificial dissipation."""

__version__ = "0.1.0"

from cgsbp.basis import (  # noqa: E402
    DegenerateOrderError,
    OrderOutOfRangeError,
    ReferenceElement,
    gauss_lobatto_nodes,
    gauss_lobatto_weights,
    lagrange_derivative_matrices,
    reference_element,
)
from cgsbp.dissipation import (  # noqa: E402
    CoefficientRegionError,
    DissipationSpec,
    Window,
    activation_field,
    assemble_dissipation,
    build_ad,
    psd_check,
    validate_coefficients,
)
from cgsbp.mesh import GlobalSystem, Mesh1D, assemble, build_global_system, build_mesh  # noqa: E402
from cgsbp.metrics import ConvergenceRow, convergence_order, make_table, p_norm_error  # noqa: E402
from cgsbp.sat import BoundarySpec, sat_matrix_and_rhs, steady_boundary_data  # noqa: E402
from cgsbp.sbp import EpsilonField, SbpOperators, build_qxx, build_sbp  # noqa: E402
from cgsbp.solvers import (  # noqa: E402
    BurgersSolver,
    LinearAdvectionSolver,
    NumericalFailure,
    StateVector,
    TimeIntegrator,
    advance_burgers,
    advance_linear,
    discrete_energy,
    exact_burgers,
    exact_steady,
    initial_pulse_step,
    solve_steady,
)
from cgsbp.weno import weno3_advance, weno3_solve  # noqa: E402
