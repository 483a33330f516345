"""Meridian-plane simulator for axisymmetric incompressible flow in a finite
cylinder, evolving the swirl circulation and scaled angular vorticity, with a
runtime verification harness for the maximum principle, the velocity-gradient
and sup bounds, the vertical-average identity, energy dissipation under a
critical smallness condition, and scaling invariance."""

__version__ = "0.1.0"

from .grid import (BoundaryCondition, BoundarySet, MeridianGrid, ScalarField,
                   dirichlet, fill_ghosts, integrate, linf_norm, neumann,
                   parity, robin, weighted_lp_norm)
from .operators import (HessianParts, MeridianVector, advect, grad_meridian,
                        hessian_cyl, laplacian_cyl, laplacian_cyl4)
from .elliptic import (EllipticProblem, SolverError, max_divergence,
                       solve_stream, solve_vr_over_r, stream_problem,
                       stream_vr_over_r, velocity_from_stream,
                       vr_over_r_problem)
from .dynamics import (BlowupError, FlowState, RunResult, SimConfig,
                       Simulation, rhs_gamma, rhs_omega, run, stable_dt,
                       stable_dt_bounds)
from .diagnostics import (BoundConstants, DiagnosticsRecord, RecordComputer,
                          compute_constants, energy_drift, first_doubling_time,
                          gradient_bound_margins, max_principle_growth,
                          scaling_invariance, smallness, sup_bound_margin,
                          vertical_average_deviation)
from .initdata import DataFamily, amplitude_for_smallness, make_initial, rescaled
