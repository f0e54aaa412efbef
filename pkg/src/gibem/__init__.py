"""Boundary element solver for 3D linear elastostatics on trimmed NURBS
patches, with collocation on Greville points and a displacement basis that
can be refined independently of the geometry."""

from .splines import (
    BasisSpace,
    GrevilleSet,
    KnotVector,
    bspline_basis,
    bspline_basis_derivs,
    bspline_curve_point,
    degree_elevate,
    greville_abscissae,
    knot_insert,
    unit_interval_space,
)
from .geometry import (
    NurbsPatch,
    TrimmedPatch,
    TrimmingCurve,
    build_quarter_cylinder,
    straight_trim_pair,
)
from .kernels import Material
from .model import (
    BoundaryModel,
    FieldSpacePair,
    LoadState,
    SolverConfig,
    build_cube_model,
    build_trimmed_cube_model,
)
from .assembly import assemble, collocation_points, neumann_rhs
from .solve import (
    Solution,
    elevate_model_order,
    evaluate_displacement,
    evaluate_displacement_many,
    refinement_study,
    solve_model,
)
from .modelio import (
    TraceRequest,
    parse_model,
    write_model,
    write_trace,
    write_vtk,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSpace",
    "BoundaryModel",
    "FieldSpacePair",
    "GrevilleSet",
    "KnotVector",
    "LoadState",
    "Material",
    "NurbsPatch",
    "Solution",
    "SolverConfig",
    "TraceRequest",
    "TrimmedPatch",
    "TrimmingCurve",
    "assemble",
    "bspline_basis",
    "bspline_basis_derivs",
    "bspline_curve_point",
    "build_cube_model",
    "build_quarter_cylinder",
    "build_trimmed_cube_model",
    "collocation_points",
    "degree_elevate",
    "elevate_model_order",
    "evaluate_displacement",
    "evaluate_displacement_many",
    "greville_abscissae",
    "knot_insert",
    "neumann_rhs",
    "parse_model",
    "refinement_study",
    "solve_model",
    "straight_trim_pair",
    "unit_interval_space",
    "write_model",
    "write_trace",
    "write_vtk",
    "__version__",
]
