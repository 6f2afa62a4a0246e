"""Constrained variational minimization on polar grids with symmetry diagnostics."""

from .functional import (
    FSpec,
    Multipliers,
    ProblemParams,
    config_from_json,
    config_to_json,
    eval_objective,
    lp_norm,
    mean_constraint,
    power_law,
    zero_f,
)
from .grids import (
    Field,
    PolarGrid,
    RadialDomain,
    annulus,
    build_polar_grid,
    disk,
    dump_field,
    grad_sq,
    integrate,
    parse_field,
    reflect_field,
    rotate_field,
)
from .rearrange import (
    HalfPlane,
    HOrder,
    SymmetryReport,
    check_H_order,
    foliated_symmetrize,
    mollify,
    symmetry_report,
    two_point_rearrange,
)
from .solve import (
    MinimizeResult,
    SolveOptions,
    build_half_support_competitor,
    certify,
    minimize,
    minimize_antisymmetric,
)
from .spectral import NeumannMode, bessel_j, eigenfield, neumann_mode, neumann_root

__version__ = "0.1.0"

__all__ = [
    "FSpec",
    "Multipliers",
    "ProblemParams",
    "config_from_json",
    "config_to_json",
    "eval_objective",
    "lp_norm",
    "mean_constraint",
    "power_law",
    "zero_f",
    "Field",
    "PolarGrid",
    "RadialDomain",
    "annulus",
    "build_polar_grid",
    "disk",
    "dump_field",
    "grad_sq",
    "integrate",
    "parse_field",
    "reflect_field",
    "rotate_field",
    "HalfPlane",
    "HOrder",
    "SymmetryReport",
    "check_H_order",
    "foliated_symmetrize",
    "mollify",
    "symmetry_report",
    "two_point_rearrange",
    "MinimizeResult",
    "SolveOptions",
    "build_half_support_competitor",
    "certify",
    "minimize",
    "minimize_antisymmetric",
    "NeumannMode",
    "bessel_j",
    "eigenfield",
    "neumann_mode",
    "neumann_root",
]
