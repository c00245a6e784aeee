"""Coarse-to-fine decomposition and linear feature recombination.

Repeated normal filtering with increasingly aggressive parameters peels
geometric features off a mesh scale by scale. The differences between
consecutive levels (vertex and normal deltas) can be linearly recombined
with per-level coefficients to boost or attenuate features of chosen
scales; the recombined vertex and normal targets are generally
incompatible, so the final mesh comes from the same vertex reconstruction
used after filtering. The reconstruction's system matrix is independent of
the coefficients, so one factorization serves any number of recombinations.
"""

import json
import warnings
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .io import load_mesh, save_mesh
from .mesh import build_neighborhoods, compute_face_geometry
from .solver import FilterParams, filter_signal
from .vertex_update import VertexSystem, VertexUpdateParams, update_vertices

__all__ = [
    "RegionMask",
    "ScaleDecomposition",
    "decompose",
    "combine",
    "combine_texture",
    "save_decomposition",
    "load_decomposition",
]


class RegionMask:
    """Vertex and face membership flags for region-restricted editing.

    Faces with mixed vertex membership count as out-of-region, so edits
    never straddle the mask boundary.
    """

    def __init__(self, vertex_mask, face_mask):
        self.vertex_mask = np.asarray(vertex_mask, dtype=bool)
        self.face_mask = np.asarray(face_mask, dtype=bool)

    @classmethod
    def from_vertices(cls, mesh, vertex_indices):
        vmask = np.zeros(mesh.n_vertices, dtype=bool)
        vmask[np.asarray(vertex_indices, dtype=np.int64)] = True
        fmask = vmask[mesh.faces].all(axis=1)
        return cls(vmask, fmask)

    @classmethod
    def from_faces(cls, mesh, face_indices):
        vmask = np.zeros(mesh.n_vertices, dtype=bool)
        faces = np.asarray(face_indices, dtype=np.int64)
        vmask[mesh.faces[faces].ravel()] = True
        fmask = vmask[mesh.faces].all(axis=1)
        return cls(vmask, fmask)


class ScaleDecomposition:
    """Mesh sequence from coarse base to original, with per-level deltas.

    ``meshes[0]`` is the base (most filtered) mesh and ``meshes[-1]`` the
    original; all levels share connectivity. ``vertex_deltas[k]`` and
    ``normal_deltas[k]`` hold the difference from level ``k`` to level
    ``k+1``, so summing all deltas onto the base reproduces the original.
    """

    def __init__(self, meshes, schedule, update_params):
        self.meshes = list(meshes)
        self.schedule = list(schedule)
        self.update_params = update_params or VertexUpdateParams()
        self.normals = [
            compute_face_geometry(m, on_degenerate="skip").normals
            for m in self.meshes
        ]
        base = self.meshes[0]
        self.vertex_deltas = np.stack(
            [
                self.meshes[k].vertices - self.meshes[k - 1].vertices
                for k in range(1, len(self.meshes))
            ]
        ) if len(self.meshes) > 1 else np.zeros((0, base.n_vertices, 3))
        self.normal_deltas = np.stack(
            [
                self.normals[k] - self.normals[k - 1]
                for k in range(1, len(self.meshes))
            ]
        ) if len(self.meshes) > 1 else np.zeros((0, base.n_faces, 3))
        self._system = None

    @property
    def levels(self):
        return len(self.meshes) - 1

    @property
    def base(self):
        return self.meshes[0]

    @property
    def original(self):
        return self.meshes[-1]

    def system(self):
        """The prefactorized reconstruction system (built on first use)."""
        if self._system is None:
            self._system = VertexSystem(self.base, self.update_params.w)
        return self._system

    def targets(self, alphas, mask=None):
        """Recombined vertex positions and raw (unnormalized) normals.

        Both are affine in the coefficients. With a mask, targets outside
        the region revert to the original mesh's values.
        """
        alphas = np.asarray(alphas, dtype=np.float64)
        if alphas.shape != (self.levels,):
            raise ValueError(f"need {self.levels} coefficients")
        v = self.base.vertices.copy()
        n = self.normals[0].copy()
        if self.levels:
            v += np.einsum("k,kvd->vd", alphas, self.vertex_deltas)
            n += np.einsum("k,kfd->fd", alphas, self.normal_deltas)
        if mask is not None:
            v[~mask.vertex_mask] = self.original.vertices[~mask.vertex_mask]
            n[~mask.face_mask] = self.normals[-1][~mask.face_mask]
        return v, n


def decompose(mesh, schedule, update_params=None):
    """Filter a mesh repeatedly to build a coarse-to-fine decomposition.

    The schedule is ordered from finest removal to coarsest: its first
    entry filters the input, each later entry filters the previous result.
    Normals run through the unit-constrained solver with the signal itself
    as guidance; vertices follow via the reconstruction.

    Returns
    -------
    ScaleDecomposition
        With ``levels == len(schedule)``.
    """
    update_params = update_params or VertexUpdateParams()
    sequence = [mesh]
    current = mesh
    for params in schedule:
        params = replace(params, unit_constrained=True)
        geom = compute_face_geometry(current, on_degenerate="skip")
        nbrs = build_neighborhoods(current, geom, params.eta)
        filtered = filter_signal(
            geom.normals, None, geom, nbrs, params, record_trace=False
        )
        current = update_vertices(current, filtered.signal, update_params)
        sequence.append(current)
    return ScaleDecomposition(list(reversed(sequence)), schedule, update_params)


def combine(decomp, alphas, mask=None):
    """Reconstruct a mesh from recombined per-level targets.

    Coefficients of 1 reproduce the original mesh; 0 drops a level's
    features; values above 1 boost them and negative values invert them.
    A combined normal that cancels to zero falls back to the base mesh's
    normal for that face (reported through a warning).
    """
    v_target, n_raw = decomp.targets(alphas, mask)
    norms = np.linalg.norm(n_raw, axis=1)
    collapsed = norms < 1e-14
    if collapsed.any():
        warnings.warn(
            f"{int(collapsed.sum())} combined normals vanished; "
            "falling back to base normals"
        )
        n_raw = n_raw.copy()
        n_raw[collapsed] = decomp.normals[0][collapsed]
        norms[collapsed] = np.linalg.norm(n_raw[collapsed], axis=1)
    n_target = n_raw / norms[:, None]
    anchor = decomp.base.with_vertices(v_target)
    return update_vertices(
        anchor, n_target, decomp.update_params, system=decomp.system()
    )


def combine_texture(levels, alphas):
    """Linear recombination of a coarse-to-fine color sequence.

    ``levels`` runs from the most filtered colors to the original; the
    result is the base plus weighted per-level differences, clamped to
    [0, 1].
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    if len(levels) != len(alphas) + 1:
        raise ValueError("need one more level than coefficients")
    out = np.asarray(levels[0], dtype=np.float64).copy()
    for k, alpha in enumerate(alphas, start=1):
        out += alpha * (np.asarray(levels[k]) - np.asarray(levels[k - 1]))
    return np.clip(out, 0.0, 1.0)


def save_decomposition(decomp, out_dir):
    """Persist a decomposition: level meshes, delta blobs, JSON index.

    Deltas are stored as little-endian float32 binary, row-major.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh_files, vdelta_files, ndelta_files = [], [], []
    for k, mesh in enumerate(decomp.meshes):
        name = f"level_{k:03d}.obj"
        save_mesh(mesh, out_dir / name)
        mesh_files.append(name)
    for k in range(decomp.levels):
        vname = f"vertex_delta_{k + 1:03d}.f32"
        nname = f"normal_delta_{k + 1:03d}.f32"
        decomp.vertex_deltas[k].astype("<f4").tofile(out_dir / vname)
        decomp.normal_deltas[k].astype("<f4").tofile(out_dir / nname)
        vdelta_files.append(vname)
        ndelta_files.append(nname)
    index = {
        "levels": decomp.levels,
        "meshes": mesh_files,
        "vertex_deltas": vdelta_files,
        "normal_deltas": ndelta_files,
        "schedule": [asdict(p) for p in decomp.schedule],
        "update": asdict(decomp.update_params),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)


def load_decomposition(in_dir):
    """Load a decomposition saved by :func:`save_decomposition`.

    Level meshes are authoritative for vertex positions; the float32 delta
    blobs are validated against them and used as stored.
    """
    in_dir = Path(in_dir)
    with open(in_dir / "manifest.json", "r", encoding="utf-8") as fh:
        index = json.load(fh)
    meshes = [load_mesh(in_dir / name) for name in index["meshes"]]
    schedule = [FilterParams(**p) for p in index["schedule"]]
    update_params = VertexUpdateParams(**index["update"])
    decomp = ScaleDecomposition(meshes, schedule, update_params)
    for k, name in enumerate(index["vertex_deltas"]):
        stored = np.fromfile(in_dir / name, dtype="<f4").reshape(-1, 3)
        if stored.shape != decomp.vertex_deltas[k].shape:
            raise ValueError(f"delta file {name} does not match the meshes")
        decomp.vertex_deltas[k] = stored.astype(np.float64)
    for k, name in enumerate(index["normal_deltas"]):
        stored = np.fromfile(in_dir / name, dtype="<f4").reshape(-1, 3)
        if stored.shape != decomp.normal_deltas[k].shape:
            raise ValueError(f"delta file {name} does not match the meshes")
        decomp.normal_deltas[k] = stored.astype(np.float64)
    return decomp
