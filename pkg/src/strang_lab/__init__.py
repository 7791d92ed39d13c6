"""Polytopal discretizations of anisotropic diffusion -div(K grad u) = f with
consistency and stability error auditing."""

from .framework import (DiscreteScheme, NonCoerciveError, aubin_nitsche_identity,
                        consistency_dual_norm, consistency_vector, error_measures,
                        solve_scheme, stability_constant, verify_energy_bound)
from .mesh import Mesh, MeshError, build_cartesian, perturb, read_mesh, write_mesh
from .model import DiffusionField, ManufacturedCase, get_case
from .studies import (SCHEMES, StudySpec, build_scheme, run_anisotropy_sweep,
                      run_bound_audit, run_convergence, run_projector_rates)

__version__ = "0.1.0"

__all__ = [
    "DiffusionField", "DiscreteScheme", "ManufacturedCase", "Mesh", "MeshError",
    "NonCoerciveError", "SCHEMES", "StudySpec", "aubin_nitsche_identity", "build_cartesian",
    "build_scheme", "consistency_dual_norm", "consistency_vector", "error_measures",
    "get_case", "perturb", "read_mesh", "run_anisotropy_sweep", "run_bound_audit",
    "run_convergence", "run_projector_rates", "solve_scheme", "stability_constant",
    "verify_energy_bound", "write_mesh",
]
