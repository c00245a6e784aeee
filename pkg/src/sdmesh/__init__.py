"""Scale-aware static/dynamic filtering of signals on triangle meshes.

The package filters per-face signals (unit normals, surface-mapped texture
colors) by minimizing an energy that balances fidelity to the input against
a robust neighborhood regularizer steered by a static guidance signal and
the evolving signal itself. On top of the core filter it provides vertex
reconstruction from filtered normals, multiscale feature decomposition and
recombination, denoising with patch-based guidance, evaluation metrics, a
batch CLI, and an HTTP service for interactive feature editing.
"""

from .mesh import (
    TriMesh,
    FaceGeometry,
    NeighborhoodTable,
    DegenerateFaceError,
    compute_face_geometry,
    build_neighborhoods,
    average_centroid_spacing,
)
from .solver import (
    FilterParams,
    EnergyBreakdown,
    FilterResult,
    SolverError,
    kernel_phi,
    kernel_psi,
    rescale_lambda,
    energy,
    fixed_point_step,
    fixed_point_step_normalized,
    mm_step,
    has_converged,
    filter_signal,
)
from .vertex_update import (
    VertexUpdateParams,
    ProjectionResult,
    VertexSystem,
    project_to_oriented_normal,
    update_vertices,
    normal_consistency_report,
)
from .guidance import identity_guidance, patch_guidance
from .paramselect import RegionStats, NuSelection, region_stats, nu_range
from .metrics import align_centroids, mean_normal_deviation, mean_vertex_deviation
from .multiscale import (
    RegionMask,
    ScaleDecomposition,
    decompose,
    combine,
    combine_texture,
    save_decomposition,
    load_decomposition,
)
from .texture import SurfaceSamples, lift_texture, filter_colors, write_back

__all__ = [
    "TriMesh",
    "FaceGeometry",
    "NeighborhoodTable",
    "DegenerateFaceError",
    "compute_face_geometry",
    "build_neighborhoods",
    "average_centroid_spacing",
    "FilterParams",
    "EnergyBreakdown",
    "FilterResult",
    "SolverError",
    "kernel_phi",
    "kernel_psi",
    "rescale_lambda",
    "energy",
    "fixed_point_step",
    "fixed_point_step_normalized",
    "mm_step",
    "has_converged",
    "filter_signal",
    "VertexUpdateParams",
    "ProjectionResult",
    "VertexSystem",
    "project_to_oriented_normal",
    "update_vertices",
    "normal_consistency_report",
    "identity_guidance",
    "patch_guidance",
    "RegionStats",
    "NuSelection",
    "region_stats",
    "nu_range",
    "align_centroids",
    "mean_normal_deviation",
    "mean_vertex_deviation",
    "RegionMask",
    "ScaleDecomposition",
    "decompose",
    "combine",
    "combine_texture",
    "save_decomposition",
    "load_decomposition",
    "SurfaceSamples",
    "lift_texture",
    "filter_colors",
    "write_back",
]

__version__ = "0.1.0"
