"""Static guidance construction for normal filtering.

The default guidance is the input signal itself. For denoising, a
patch-based guidance replaces each face normal by the area-weighted
average over the most normal-consistent surface patch containing the
face, which recovers reliable structure from noisy input.
"""

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["identity_guidance", "patch_guidance"]


def identity_guidance(signal):
    """The signal itself (bit-exact)."""
    return signal


def patch_guidance(mesh, geom, normals, patch_radius):
    """Guidance normals from the most consistent centroid-ball patch.

    Candidate patches for a face are the centroid balls of the given
    radius centered at each face whose ball contains it. Each patch is
    scored by its maximum pairwise normal difference plus its
    area-weighted normal variance relative to the largest variance among
    the candidates; the guidance normal is the normalized area-weighted
    average over the lowest-scoring patch. Degenerate or isolated faces
    keep their own normal.

    Parameters
    ----------
    mesh : TriMesh
    geom : FaceGeometry
    normals : ndarray, shape (n_f, 3)
        Unit normals to build the guidance from.
    patch_radius : float
        Centroid-ball radius, > 0.

    Returns
    -------
    ndarray, shape (n_f, 3) of unit guidance normals.
    """
    if patch_radius <= 0:
        raise ValueError("patch_radius must be positive")
    normals = np.asarray(normals, dtype=np.float64)
    n_f = mesh.n_faces
    guidance = np.array(normals)
    alive = np.nonzero(~geom.degenerate)[0]
    if alive.size == 0:
        return guidance
    centroids = geom.centroids
    areas = geom.areas
    tree = cKDTree(centroids[alive])
    balls = tree.query_ball_point(centroids[alive], patch_radius, return_sorted=True)
    members = {int(f): alive[b] for f, b in zip(alive, balls)}

    maxdiff = np.zeros(n_f)
    variance = np.zeros(n_f)
    mean_normal = np.array(normals)
    for f in alive:
        patch = members[int(f)]
        n = normals[patch]
        diffs = n[:, None, :] - n[None, :, :]
        maxdiff[f] = np.sqrt((diffs**2).sum(axis=2).max())
        a = areas[patch]
        weighted = (a[:, None] * n).sum(axis=0)
        norm = np.linalg.norm(weighted)
        if norm > 0 and a.sum() > 0:
            mean = weighted / norm
            mean_normal[f] = mean
            variance[f] = float((a * ((n - mean) ** 2).sum(axis=1)).sum() / a.sum())

    for f in alive:
        candidates = members[int(f)]
        if candidates.size == 0:
            continue
        vmax = variance[candidates].max()
        ratio = variance[candidates] / vmax if vmax > 0 else 0.0
        scores = maxdiff[candidates] + ratio
        best = candidates[int(np.argmin(scores))]
        patch = members[int(best)]
        weighted = (areas[patch, None] * normals[patch]).sum(axis=0)
        norm = np.linalg.norm(weighted)
        if norm > 0:
            guidance[f] = weighted / norm
    return guidance
