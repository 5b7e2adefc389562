"""Finite-volume solver for chemotaxis with local sensing.

Two-point flux approximation in space, linearly implicit IMEX Euler in time,
with structure-preserving diagnostics (mass, positivity, entropy dissipation,
duality and quasi-stationary estimates) and a CLI reproducing the reference
testcases at desk scale.
"""

from .mesh import (
    DiscreteField,
    Mesh,
    MeshError,
    approximate_gradient,
    build_from_triangulation,
    build_uniform_1d,
    check_admissibility,
    discrete_seminorm,
    dump_mesh,
    lebesgue_norm,
    mean_value,
    project_cell_averages,
)
from .gmsh_io import GmshError, load_gmsh
from .params import Motility, SchemeParams, total_time
from .linsolve import (
    SolverError,
    SparseSystem,
    poisson_solver,
    smallest_nonzero_eigenvalue,
    solve,
    solve_zero_mean_poisson,
)
from .diagnostics import (
    ObservableSeries,
    ap_observables,
    dissipation,
    dual_norm,
    duality_budget,
    entropy,
    projection_counterexample,
    relative_entropy,
    stability_threshold,
)
from .scheme import (
    SchemeError,
    State,
    assemble_Mu,
    assemble_Mv,
    initial_state,
    run,
    stationary_v_init,
    step,
)
from .geometry import disk_mesh, square_mesh

__version__ = "0.1.0"
