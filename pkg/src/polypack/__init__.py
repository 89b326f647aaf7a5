"""Periodic packings, dyadic grid approximations and multi-scale interstitial filling."""
from .geometry import Body, CubeIndex, CubeSet, DensityInterval, grid_inner, grid_outer, jordan_volume
from .packing import (InvalidPackingError, Placement, PeriodicPacking, complement_grid, density,
                      density_monte_carlo, merge, validate)
from .generators import ReferencePacking, clip_to_cube, fcc_spheres, hex_disks, square_tiling
from .hierarchy import (ConvergenceRow, FillPlan, convergence_experiment, fill_interstices,
                        iterate_fill, iterate_limit, limit_density)
from .kernels import BACKEND

__all__ = [
    "Body", "CubeIndex", "CubeSet", "DensityInterval", "grid_inner", "grid_outer", "jordan_volume",
    "InvalidPackingError", "Placement", "PeriodicPacking", "complement_grid", "density",
    "density_monte_carlo", "merge", "validate",
    "ReferencePacking", "clip_to_cube", "fcc_spheres", "hex_disks", "square_tiling",
    "ConvergenceRow", "FillPlan", "convergence_experiment", "fill_interstices", "iterate_fill",
    "iterate_limit", "limit_density", "BACKEND",
]
__version__ = "0.1.0"
