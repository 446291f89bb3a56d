"""Coordination problems on cellular sheaves.

A cellular sheaf attaches a vector space to every vertex and edge of a graph
and a linear restriction map to every vertex-edge incidence.  This package
builds the associated coboundary and Laplacian operators, computes the
spaces of consistent assignments (H0) and obstruction classes (H1), runs
linear and nonlinear diffusion dynamics, and solves node-objective /
edge-potential coordination programs with a consensus ADMM that also runs on
an auditable synchronous message-passing simulator.

Numerical kernels dispatch to a compiled extension when it is available and
to a pure-numpy implementation otherwise; set SHEAFCOORD_BACKEND to
``compiled`` or ``python`` to force one (``auto`` is the default).
"""

from ._backend import backend_name
from .convex import (
    BoxObjective,
    EdgePotential,
    FixedValueObjective,
    HuberPotential,
    NodeObjective,
    ProxQuery,
    QuadraticObjective,
    QuadraticPotential,
    ZeroIndicatorPotential,
    ZeroObjective,
)
from .core import (
    CellularSheaf,
    Cochain0,
    Cochain1,
    Graph,
    OrientedEdge,
    LinearMap,
    SectionBasis,
    ShapeViolation,
    ValidationReport,
    apply_coboundary,
    apply_laplacian,
    coboundary_dense,
    constant_sheaf,
    dirichlet_energy,
    global_section_basis,
    h1_dimension,
    is_global_section,
    laplacian_dense,
    validate_sheaf,
    zero_cochain0,
    zero_cochain1,
)
from .distsim import (
    AgentNode,
    EdgeMailbox,
    LocalityReport,
    LocalityViolation,
    Message,
    RoundLog,
    audit_locality,
    run_distributed,
)
from .dynamics import (
    FlowConfig,
    FlowTrace,
    edge_targets,
    estimate_spectral_bound,
    harmonic_projection,
    linear_heat_flow,
    nonlinear_heat_flow,
    nonlinear_laplacian_apply,
)
from .homprog import (
    STATUS_CONVERGED,
    STATUS_MAX_ITERS,
    AdmmConfig,
    FeasibilityReport,
    HomologicalProgram,
    IterateState,
    Mode,
    Residuals,
    SolveTrace,
    admm_solve,
    check_feasibility,
    compute_residuals,
    program_objective,
)
from .scenario import (
    Scenario,
    ScenarioError,
    builtin_scenario_names,
    load_builtin_scenario,
    load_scenario,
    parse_scenario,
    save_scenario,
    serialize_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend_name",
    # core
    "Graph",
    "OrientedEdge",
    "LinearMap",
    "CellularSheaf",
    "Cochain0",
    "Cochain1",
    "SectionBasis",
    "ShapeViolation",
    "ValidationReport",
    "validate_sheaf",
    "apply_coboundary",
    "coboundary_dense",
    "apply_laplacian",
    "laplacian_dense",
    "global_section_basis",
    "h1_dimension",
    "is_global_section",
    "dirichlet_energy",
    "constant_sheaf",
    "zero_cochain0",
    "zero_cochain1",
    # convex
    "ProxQuery",
    "NodeObjective",
    "ZeroObjective",
    "QuadraticObjective",
    "FixedValueObjective",
    "BoxObjective",
    "EdgePotential",
    "QuadraticPotential",
    "ZeroIndicatorPotential",
    "HuberPotential",
    # dynamics
    "FlowConfig",
    "FlowTrace",
    "estimate_spectral_bound",
    "linear_heat_flow",
    "nonlinear_heat_flow",
    "nonlinear_laplacian_apply",
    "edge_targets",
    "harmonic_projection",
    # homprog
    "STATUS_CONVERGED",
    "STATUS_MAX_ITERS",
    "Mode",
    "HomologicalProgram",
    "AdmmConfig",
    "IterateState",
    "Residuals",
    "SolveTrace",
    "FeasibilityReport",
    "admm_solve",
    "check_feasibility",
    "compute_residuals",
    "program_objective",
    # distsim
    "AgentNode",
    "EdgeMailbox",
    "Message",
    "RoundLog",
    "LocalityReport",
    "LocalityViolation",
    "run_distributed",
    "audit_locality",
    # scenario
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "load_scenario",
    "serialize_scenario",
    "save_scenario",
    "builtin_scenario_names",
    "load_builtin_scenario",
]
