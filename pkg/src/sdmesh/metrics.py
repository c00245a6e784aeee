"""Evaluation metrics: normal deviation, vertex deviation, alignment."""

import numpy as np

__all__ = [
    "align_centroids",
    "mean_normal_deviation",
    "mean_vertex_deviation",
]


def align_centroids(result, reference):
    """Translate ``result`` so the vertex centroids coincide.

    This is the translation minimizing the l2 vertex deviation between
    the meshes, used to factor placement out of comparisons.
    """
    if result.n_vertices != reference.n_vertices:
        raise ValueError("meshes must have corresponding vertices")
    shift = reference.vertices.mean(axis=0) - result.vertices.mean(axis=0)
    return result.with_vertices(result.vertices + shift)


def mean_normal_deviation(a, b):
    """Mean per-face angle between two unit normal signals, in degrees."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("signals must have equal shape")
    dots = np.clip(np.einsum("nd,nd->n", a, b), -1.0, 1.0)
    return float(np.degrees(np.arccos(dots)).mean())


def mean_vertex_deviation(a, b):
    """Mean distance between corresponding vertices of two meshes."""
    if a.n_vertices != b.n_vertices:
        raise ValueError("meshes must have corresponding vertices")
    return float(np.linalg.norm(a.vertices - b.vertices, axis=1).mean())
