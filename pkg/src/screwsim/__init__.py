"""Twin-screw extruder cross-section flow toolkit.

Self-wiping screw profiles, a snapping boundary-conforming background
mesh, generalized-Newtonian material laws, a stabilized space-time
finite element flow/temperature solver and post-processing utilities.
"""

from screwsim.geometry import (
    BarrelGeometry,
    GeometryError,
    ScrewParams,
    ScrewProfile,
    build_profile,
    cusp_points,
    min_clearance,
    rotate_profile,
    slice_rotation,
)
from screwsim.srmum import (
    MeshError,
    MiddleLine,
    SrmumAssembly,
    build_annulus,
    build_assembly,
    delta_y_rel,
    extrude,
    middle_line,
    screw_id_shift,
    snap,
    validate,
    y_rel_max,
)
from screwsim.materials import (
    Carreau,
    CrossWLF,
    MaterialError,
    MaterialModel,
    Newtonian,
    conductivity,
    dissipation,
    shear_rate,
    viscosity,
)
from screwsim.solver import (
    BoundaryCondition,
    NonConvergenceError,
    SimState,
    advance,
    assemble_flow_slab,
    assemble_temp_slab,
    boundary_velocity,
    newton_solve,
    stab_taus,
)
from screwsim.postio import (
    FieldSnapshot,
    convergence_report,
    export_vtk,
    read_vtk,
    sample_line,
    section_flux,
)

__version__ = "0.1.0"

__all__ = [
    "BarrelGeometry",
    "BoundaryCondition",
    "Carreau",
    "CrossWLF",
    "FieldSnapshot",
    "GeometryError",
    "MaterialError",
    "MaterialModel",
    "Newtonian",
    "MeshError",
    "MiddleLine",
    "NonConvergenceError",
    "ScrewParams",
    "ScrewProfile",
    "SimState",
    "SrmumAssembly",
    "advance",
    "assemble_flow_slab",
    "assemble_temp_slab",
    "boundary_velocity",
    "build_annulus",
    "build_assembly",
    "build_profile",
    "conductivity",
    "convergence_report",
    "cusp_points",
    "delta_y_rel",
    "dissipation",
    "export_vtk",
    "extrude",
    "middle_line",
    "min_clearance",
    "newton_solve",
    "read_vtk",
    "rotate_profile",
    "sample_line",
    "screw_id_shift",
    "section_flux",
    "shear_rate",
    "slice_rotation",
    "snap",
    "stab_taus",
    "validate",
    "viscosity",
    "y_rel_max",
]
