"""Ground states of the focusing NLS on metric graphs with point and edge potentials."""

from .graph import (Edge, GraphError, GraphPoint, MetricGraph, Potential, Vertex, distance,
                    figure_one_graph, half_line, line, load_graph, parse_graph, star, tadpole,
                    validate)
from .mesh import GraphFunction, Mesh, build_mesh, norm, sample
from .operators import AssembledForms, assemble, energy, stationary_residual
from .soliton import Soliton, gamma_mu, mass_threshold, t_mu
from .spectral import EigenPair, check_assumption_E0, ground_eigenpair
from .solver import GroundStateReport, SolverConfig, flow_step, mass_sweep, solve_ground_state
from .diagnostics import (DiagnosticsRecord, concentrated_mass, concentration_function,
                          gn_constant_lower_bound, lower_bound_certificate, runaway_witness)

__version__ = "0.1.0"

__all__ = [
    "Edge",
    "GraphError",
    "GraphPoint",
    "MetricGraph",
    "Potential",
    "Vertex",
    "distance",
    "figure_one_graph",
    "half_line",
    "line",
    "load_graph",
    "parse_graph",
    "star",
    "tadpole",
    "validate",
    "GraphFunction",
    "Mesh",
    "build_mesh",
    "norm",
    "sample",
    "AssembledForms",
    "assemble",
    "energy",
    "stationary_residual",
    "Soliton",
    "gamma_mu",
    "mass_threshold",
    "t_mu",
    "EigenPair",
    "check_assumption_E0",
    "ground_eigenpair",
    "GroundStateReport",
    "SolverConfig",
    "flow_step",
    "mass_sweep",
    "solve_ground_state",
    "DiagnosticsRecord",
    "concentrated_mass",
    "concentration_function",
    "gn_constant_lower_bound",
    "lower_bound_certificate",
    "runaway_witness",
]
