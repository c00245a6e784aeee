"""Filtering of texture colors as a signal on the mesh surface.

Texture pixels are lifted through the texture coordinates to 3D points on
the mesh, so color smoothing follows surface distances instead of image
distances. The lifted colors run through the same filter as face normals,
with uniform unit sample weights in place of face areas and spatial
distances between the lifted 3D points.
"""

import warnings

import numpy as np
from scipy.spatial import cKDTree

from .mesh import FaceGeometry, NeighborhoodTable
from .solver import filter_signal, kernel_phi

__all__ = ["SurfaceSamples", "lift_texture", "filter_colors", "write_back"]


class SurfaceSamples:
    """Texture pixels lifted to mesh-surface points.

    Attributes
    ----------
    points : ndarray, shape (n, 3)
        Lifted 3D positions on the mesh surface.
    colors : ndarray, shape (n, 3)
        RGB in [0, 1].
    pixel_coords : ndarray, shape (n, 2) of int
        Source (row, col) image coordinates.
    skipped_faces : int
        Faces dropped for missing or degenerate texture triangles.
    """

    def __init__(self, points, colors, pixel_coords, skipped_faces=0):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.clip(
            np.asarray(colors, dtype=np.float64).reshape(-1, 3), 0.0, 1.0
        )
        self.pixel_coords = np.asarray(pixel_coords, dtype=np.int64).reshape(-1, 2)
        if not (len(self.points) == len(self.colors) == len(self.pixel_coords)):
            raise ValueError("points, colors, pixel_coords must align")
        self.skipped_faces = int(skipped_faces)

    def __len__(self):
        return len(self.points)

    def neighborhoods(self, eta):
        """Radius-3*eta point neighborhoods with spatial Gaussian weights.

        Returns a (geometry, table) pair in the shape the solver expects:
        unit sample weights in place of areas, points in place of
        centroids.
        """
        if eta <= 0:
            raise ValueError("eta must be positive")
        n = len(self)
        geom = FaceGeometry(
            normals=np.zeros((n, 3)),
            areas=np.ones(n),
            centroids=self.points,
            degenerate=np.zeros(n, dtype=bool),
        )
        tree = cKDTree(self.points)
        pairs = tree.query_pairs(3.0 * eta, output_type="ndarray")
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(np.bincount(rows, minlength=n))
        dists = np.linalg.norm(self.points[cols] - self.points[rows], axis=1)
        weights = kernel_phi(dists, eta)
        return geom, NeighborhoodTable(indptr, cols, weights, eta)


def lift_texture(mesh, image, uv=None):
    """Lift every covered pixel center to a 3D surface point.

    A pixel belongs to a face when its center falls inside the face's
    texture triangle; the 3D position interpolates the face's vertices
    with the pixel center's barycentric coordinates. Pixel centers map to
    texture space as ``u = (col + 0.5) / width`` and
    ``v = 1 - (row + 0.5) / height`` (origin at the bottom-left). Pixels
    outside every triangle are excluded; faces with degenerate texture
    triangles are skipped and counted.

    Parameters
    ----------
    mesh : TriMesh
    image : ndarray, shape (H, W, 3)
        RGB raster in [0, 1].
    uv : ndarray, shape (n_f, 3, 2), optional
        Per-corner texture coordinates; defaults to ``mesh.uv``.
    """
    uv = mesh.uv if uv is None else np.asarray(uv, dtype=np.float64)
    if uv is None:
        raise ValueError("mesh has no texture coordinates")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise ValueError("image must be a non-empty (H, W, 3) raster")
    height, width = image.shape[:2]
    claimed = np.zeros((height, width), dtype=bool)
    points, colors, coords = [], [], []
    skipped = 0
    for f in range(mesh.n_faces):
        tri = uv[f]
        det = (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - (
            tri[2, 0] - tri[0, 0]
        ) * (tri[1, 1] - tri[0, 1])
        if abs(det) < 1e-14:
            skipped += 1
            continue
        cols = _pixel_range(tri[:, 0].min(), tri[:, 0].max(), width)
        rows = _pixel_range(1.0 - tri[:, 1].max(), 1.0 - tri[:, 1].min(), height)
        if cols.size == 0 or rows.size == 0:
            continue
        cc, rr = np.meshgrid(cols, rows)
        cc, rr = cc.ravel(), rr.ravel()
        u = (cc + 0.5) / width
        v = 1.0 - (rr + 0.5) / height
        b1, b2, b3 = _barycentric(tri, u, v, det)
        inside = (b1 >= -1e-12) & (b2 >= -1e-12) & (b3 >= -1e-12)
        inside &= ~claimed[rr, cc]
        if not inside.any():
            continue
        rr, cc = rr[inside], cc[inside]
        claimed[rr, cc] = True
        verts = mesh.vertices[mesh.faces[f]]
        lifted = (
            b1[inside, None] * verts[0]
            + b2[inside, None] * verts[1]
            + b3[inside, None] * verts[2]
        )
        points.append(lifted)
        colors.append(image[rr, cc])
        coords.append(np.column_stack([rr, cc]))
    if skipped:
        warnings.warn(f"{skipped} faces skipped: degenerate texture triangles")
    if not points:
        empty = np.zeros((0, 3))
        return SurfaceSamples(empty, empty, np.zeros((0, 2)), skipped)
    return SurfaceSamples(
        np.vstack(points), np.vstack(colors), np.vstack(coords), skipped
    )


def _pixel_range(lo, hi, count):
    first = max(int(np.ceil(lo * count - 0.5)), 0)
    last = min(int(np.floor(hi * count - 0.5)), count - 1)
    return np.arange(first, last + 1)


def _barycentric(tri, u, v, det):
    b2 = ((u - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - (tri[2, 0] - tri[0, 0]) * (
        v - tri[0, 1]
    )) / det
    b3 = ((tri[1, 0] - tri[0, 0]) * (v - tri[0, 1]) - (u - tri[0, 0]) * (
        tri[1, 1] - tri[0, 1]
    )) / det
    return 1.0 - b2 - b3, b2, b3


def filter_colors(samples, params, guidance=None):
    """Filter lifted texture colors with the surface-aware filter.

    Runs the unconstrained fixed-point solver for a fixed iteration budget
    (``params.max_iters``; 50 is the usual choice for colors) with unit
    sample weights and spatial distances between the lifted points.

    Returns
    -------
    ndarray, shape (n, 3)
        Filtered colors; as convex combinations of inputs they stay within
        the input range per channel.
    """
    if params.unit_constrained:
        raise ValueError("color filtering is unconstrained")
    if len(samples) == 0:
        return np.zeros((0, 3))
    geom, table = samples.neighborhoods(params.eta)
    result = filter_signal(
        samples.colors, guidance, geom, table, params,
        check_convergence=False, record_trace=False,
    )
    return result.signal


def write_back(samples, colors, image):
    """Store filtered colors into a copy of the image, clamped to [0, 1].

    Unlifted pixels keep their original values.
    """
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    if len(colors) != len(samples):
        raise ValueError("one color per sample required")
    out = np.array(image, dtype=np.float64)
    rows = samples.pixel_coords[:, 0]
    cols = samples.pixel_coords[:, 1]
    out[rows, cols] = np.clip(colors, 0.0, 1.0)
    return out
