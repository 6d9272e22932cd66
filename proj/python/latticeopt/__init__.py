"""Multi-material lattice unit-cell optimization."""

from ._core import (
    Bar,
    ConfigError,
    RunConfig,
    SolverError,
    bar_density,
    check_gradients,
    distance_to_segment,
    effective_tensor,
    export_design,
    homogenize,
    initial_design,
    isotropic_stiffness,
    ks_max,
    lks_max,
    load_config,
    optimize,
    parse_config,
    read_vtk,
    smooth_heaviside,
)

__all__ = [
    "Bar",
    "ConfigError",
    "RunConfig",
    "SolverError",
    "bar_density",
    "check_gradients",
    "distance_to_segment",
    "effective_tensor",
    "export_design",
    "homogenize",
    "initial_design",
    "isotropic_stiffness",
    "ks_max",
    "lks_max",
    "load_config",
    "optimize",
    "parse_config",
    "read_vtk",
    "smooth_heaviside",
]
