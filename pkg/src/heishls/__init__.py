"""Gauge geometry, singular potentials, and HLS quotient solvers on H^n."""

from .hgroup import (
    GroupDim,
    HPoint,
    dilate,
    dist,
    euler_field,
    gauge_norm,
    identity,
    inv,
    mul,
)
from .domain import (
    BoundaryQuad,
    GaugeDomain,
    Grid,
    boundary_quadrature,
    build_grid,
    contains,
    cylinder,
    indicator_domain,
    integrate,
    is_delta_starshaped,
)
from .kernel import (
    GridFunction,
    KernelSpec,
    conformal_family,
    energy_quotient,
    extremal_H,
    gamma_fn,
    gauge_ball_volume,
    grid_function,
    hls_energy,
    lp_norm,
    potential,
    sharp_constant,
)
from .solver import (
    BlowupMap,
    PohozaevReport,
    ProbeReport,
    SolveReport,
    SolverConfig,
    blowup_rescale,
    el_residual,
    lambda_term_magnitude,
    nonexistence_probe,
    pohozaev_input_from_solution,
    pohozaev_residual,
    solve_critical_via_limit,
    solve_subcritical,
)

__version__ = "0.1.0"

__all__ = [
    "GroupDim",
    "HPoint",
    "dilate",
    "dist",
    "euler_field",
    "gauge_norm",
    "identity",
    "inv",
    "mul",
    "BoundaryQuad",
    "GaugeDomain",
    "Grid",
    "boundary_quadrature",
    "build_grid",
    "contains",
    "cylinder",
    "indicator_domain",
    "integrate",
    "is_delta_starshaped",
    "GridFunction",
    "KernelSpec",
    "conformal_family",
    "energy_quotient",
    "extremal_H",
    "gamma_fn",
    "gauge_ball_volume",
    "grid_function",
    "hls_energy",
    "lp_norm",
    "potential",
    "sharp_constant",
    "BlowupMap",
    "PohozaevReport",
    "ProbeReport",
    "SolveReport",
    "SolverConfig",
    "blowup_rescale",
    "el_residual",
    "lambda_term_magnitude",
    "nonexistence_probe",
    "pohozaev_input_from_solution",
    "pohozaev_residual",
    "solve_critical_via_limit",
    "solve_subcritical",
    "__version__",
]
