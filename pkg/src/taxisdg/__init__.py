"""Thread-parallel matrix-free DG solver for taxis-diffusion-reaction
systems on simplicial meshes."""

from .mesh import (Mesh, BoundaryTag, MeshError, MeshFormatError,
                   MeshTopologyError, unit_square, unit_cube,
                   annulus_sector, load_gmsh)
from .fespace import DGSpace, DiscreteFunction
from .model import (PlaqueParams, PlaqueModel, ReducedModel, HeatModel,
                    AdvDiffModel, TaxisCoupledModel, manufactured_model)
from .flux import FluxScheme, SCHEME_NAMES
from .operator import DiscreteOperator
from .timeint import (ButcherTableau, dirk_tableau, stability_function,
                      gmres_solve, newton_solve, dirk_step, integrate,
                      SolverError, IntegrationResult)
from .analysis import (l2_error, l2_difference, eoc, EOCStudy,
                       run_eoc_study, conservation_audit, scaling_study,
                       ScalingRow, write_eoc_csv, write_scaling_csv)
from .config import RunConfig, ConfigError, load_config, parse_config
from .vtkio import write_vtk

__version__ = "0.1.0"

__all__ = [
    "Mesh", "BoundaryTag", "MeshError", "MeshFormatError",
    "MeshTopologyError", "unit_square", "unit_cube", "annulus_sector",
    "load_gmsh",
    "DGSpace", "DiscreteFunction",
    "PlaqueParams", "PlaqueModel", "ReducedModel", "HeatModel",
    "AdvDiffModel", "TaxisCoupledModel", "manufactured_model",
    "FluxScheme", "SCHEME_NAMES",
    "DiscreteOperator",
    "ButcherTableau", "dirk_tableau", "stability_function", "gmres_solve",
    "newton_solve", "dirk_step", "integrate", "SolverError",
    "IntegrationResult",
    "l2_error", "l2_difference", "eoc", "EOCStudy", "run_eoc_study",
    "conservation_audit", "scaling_study", "ScalingRow", "write_eoc_csv",
    "write_scaling_csv",
    "RunConfig", "ConfigError", "load_config", "parse_config",
    "write_vtk",
    "__version__",
]
