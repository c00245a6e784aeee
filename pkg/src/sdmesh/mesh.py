"""Triangle mesh container, per-face geometry, and spatial neighborhoods."""

import warnings

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

__all__ = [
    "TriMesh",
    "FaceGeometry",
    "NeighborhoodTable",
    "DegenerateFaceError",
    "compute_face_geometry",
    "build_neighborhoods",
    "average_centroid_spacing",
]

# Faces whose cross product falls below this fraction of the mean squared
# edge length are treated as degenerate (zero area, no usable normal).
DEGENERACY_RATIO = 1e-14


class DegenerateFaceError(ValueError):
    """Raised when degenerate faces are encountered and not explicitly skipped.

    Attributes
    ----------
    face_indices : list of int
        Indices of the offending faces.
    """

    def __init__(self, face_indices):
        self.face_indices = list(face_indices)
        super().__init__(f"degenerate faces: {self.face_indices}")


class TriMesh:
    """Indexed triangle mesh with vertex-sharing face adjacency.

    Parameters
    ----------
    vertices : array_like, shape (n_v, 3)
        Vertex positions in model units.
    faces : array_like, shape (n_f, 3)
        Vertex indices per face. The order is orientation-bearing:
        faces should be consistently oriented (counterclockwise when
        seen from the outside).
    uv : array_like, shape (n_f, 3, 2), optional
        Per-corner texture coordinates.

    Notes
    -----
    Face adjacency connects faces that share at least one vertex, which
    gives a denser graph than edge adjacency and lets breadth-first
    traversals pass through fan configurations. All arrays are treated
    as immutable after construction; instances are safe for concurrent
    reads.
    """

    def __init__(self, vertices, faces, uv=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        n_v = len(self.vertices)
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= n_v:
                raise ValueError("face index out of range")
            degenerate_idx = (
                (self.faces[:, 0] == self.faces[:, 1])
                | (self.faces[:, 1] == self.faces[:, 2])
                | (self.faces[:, 2] == self.faces[:, 0])
            )
            if degenerate_idx.any():
                raise ValueError(
                    f"faces with repeated vertices: {np.nonzero(degenerate_idx)[0].tolist()}"
                )
        if uv is not None:
            uv = np.ascontiguousarray(uv, dtype=np.float64)
            if uv.shape != (len(self.faces), 3, 2):
                raise ValueError("uv must have shape (n_faces, 3, 2)")
        self.uv = uv
        self._check_orientation()
        self.adj_indptr, self.adj_indices = _vertex_sharing_adjacency(
            self.faces, n_v
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def face_neighbors(self, i):
        """Indices of all faces sharing at least one vertex with face ``i``."""
        return self.adj_indices[self.adj_indptr[i] : self.adj_indptr[i + 1]]

    def bounding_box_diagonal(self):
        """Length of the axis-aligned bounding box diagonal."""
        if self.n_vertices == 0:
            return 0.0
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    def with_vertices(self, vertices):
        """New mesh with replaced vertex positions and shared connectivity."""
        out = TriMesh.__new__(TriMesh)
        out.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        if len(out.vertices) != self.n_vertices:
            raise ValueError("vertex count must be preserved")
        out.faces = self.faces
        out.uv = self.uv
        out.adj_indptr = self.adj_indptr
        out.adj_indices = self.adj_indices
        return out

    def _check_orientation(self):
        if len(self.faces) == 0:
            return
        tails = self.faces[:, [0, 1, 2]].ravel()
        heads = self.faces[:, [1, 2, 0]].ravel()
        directed = tails * (self.n_vertices + 1) + heads
        _, counts = np.unique(directed, return_counts=True)
        if (counts > 1).any():
            warnings.warn(
                "mesh orientation is inconsistent or non-manifold: "
                f"{int((counts > 1).sum())} directed edges repeat",
                stacklevel=3,
            )


class FaceGeometry:
    """Per-face normals, areas, and centroids.

    Attributes
    ----------
    normals : ndarray, shape (n_f, 3)
        Outward unit normals; zero rows for degenerate faces.
    areas : ndarray, shape (n_f,)
        Positive face areas; zero for degenerate faces.
    centroids : ndarray, shape (n_f, 3)
        Mean of the three vertex positions.
    degenerate : ndarray of bool, shape (n_f,)
        Marks faces whose area fell below the degeneracy threshold.
    """

    def __init__(self, normals, areas, centroids, degenerate):
        self.normals = normals
        self.areas = areas
        self.centroids = centroids
        self.degenerate = degenerate

    @property
    def n_faces(self):
        return len(self.areas)


class NeighborhoodTable:
    """Spatial face neighborhoods with cached spatial Gaussian weights.

    CSR-style storage: the neighbors of face ``i`` are
    ``indices[indptr[i]:indptr[i+1]]`` with matching ``weights`` holding
    the spatial kernel value for the centroid distance. A face never
    lists itself, all weights are strictly positive, and every stored
    pair satisfies the 3-sigma distance cut.
    """

    def __init__(self, indptr, indices, weights, eta):
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        self.eta = float(eta)

    @property
    def n_faces(self):
        return len(self.indptr) - 1

    def neighbors(self, i):
        """(neighbor indices, spatial weights) of face ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def pair_rows(self):
        """Row index (center face) of every stored neighbor pair."""
        return np.repeat(
            np.arange(self.n_faces), np.diff(self.indptr)
        )

    def spatial_matrix(self, data=None):
        """CSR matrix over the neighbor pattern, defaulting to the weights."""
        if data is None:
            data = self.weights
        n = self.n_faces
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(n, n))


def _vertex_sharing_adjacency(faces, n_vertices):
    """CSR adjacency over faces sharing at least one vertex (self excluded)."""
    n_f = len(faces)
    if n_f == 0:
        return np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    incidence = sparse.csr_matrix(
        (
            np.ones(3 * n_f, dtype=np.int8),
            (np.repeat(np.arange(n_f), 3), faces.ravel()),
        ),
        shape=(n_f, n_vertices),
    )
    shared = (incidence @ incidence.T).tocsr()
    shared.setdiag(0)
    shared.eliminate_zeros()
    shared.sort_indices()
    return shared.indptr.astype(np.int64), shared.indices.astype(np.int64)


def compute_face_geometry(mesh, on_degenerate="raise"):
    """Compute unit normals, areas, and centroids for every face.

    The normal of a face with vertices ``(v1, v2, v3)`` is the normalized
    cross product ``(v1 - v2) x (v3 - v2)``; the area is half the cross
    product magnitude.

    Parameters
    ----------
    mesh : TriMesh
    on_degenerate : {"raise", "skip"}
        ``"raise"`` aborts with :class:`DegenerateFaceError` listing the
        offending faces; ``"skip"`` flags them, zeroing their normal and
        area so they carry no filtering weight.

    Returns
    -------
    FaceGeometry
    """
    if on_degenerate not in ("raise", "skip"):
        raise ValueError("on_degenerate must be 'raise' or 'skip'")
    v1 = mesh.vertices[mesh.faces[:, 0]]
    v2 = mesh.vertices[mesh.faces[:, 1]]
    v3 = mesh.vertices[mesh.faces[:, 2]]
    cross = np.cross(v1 - v2, v3 - v2)
    cross_norm = np.linalg.norm(cross, axis=1)
    mean_sq_edge = (
        ((v1 - v2) ** 2).sum(axis=1)
        + ((v2 - v3) ** 2).sum(axis=1)
        + ((v3 - v1) ** 2).sum(axis=1)
    ) / 3.0
    degenerate = cross_norm < DEGENERACY_RATIO * mean_sq_edge
    if degenerate.any() and on_degenerate == "raise":
        raise DegenerateFaceError(np.nonzero(degenerate)[0])
    normals = np.zeros_like(cross)
    ok = ~degenerate
    normals[ok] = cross[ok] / cross_norm[ok, None]
    areas = np.where(degenerate, 0.0, 0.5 * cross_norm)
    centroids = (v1 + v2 + v3) / 3.0
    return FaceGeometry(normals, areas, centroids, degenerate)


def build_neighborhoods(mesh, geom, eta):
    """Collect the spatial neighborhood of every face.

    A face ``j`` belongs to ``N(i)`` when it is reachable from ``i`` by a
    breadth-first traversal over the vertex-sharing face adjacency that
    never leaves the Euclidean ball ``||c_j - c_i|| <= 3 * eta``, following
    the three-sigma support of the spatial Gaussian. The face itself and
    degenerate faces are excluded. Isolated faces get empty lists.

    Parameters
    ----------
    mesh : TriMesh
    geom : FaceGeometry
        Must come from the same mesh.
    eta : float
        Spatial Gaussian standard deviation, > 0.

    Returns
    -------
    NeighborhoodTable
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    n_f = mesh.n_faces
    radius = 3.0 * eta
    centroids = geom.centroids
    alive = ~geom.degenerate
    indptr = np.zeros(n_f + 1, dtype=np.int64)
    if n_f == 0 or not alive.any():
        return NeighborhoodTable(indptr, np.zeros(0, np.int64), np.zeros(0), eta)

    alive_ids = np.nonzero(alive)[0]
    tree = cKDTree(centroids[alive])
    balls = tree.query_ball_point(centroids[alive], radius, return_sorted=True)

    adj_indptr, adj_indices = mesh.adj_indptr, mesh.adj_indices
    in_ball = np.zeros(n_f, dtype=bool)
    visited = np.zeros(n_f, dtype=bool)
    per_face = [np.zeros(0, dtype=np.int64)] * n_f

    for pos, i in enumerate(alive_ids):
        ball = alive_ids[balls[pos]]
        in_ball[ball] = True
        visited[i] = True
        frontier = np.array([i], dtype=np.int64)
        reached = []
        while frontier.size:
            counts = adj_indptr[frontier + 1] - adj_indptr[frontier]
            total = int(counts.sum())
            if total == 0:
                break
            offsets = np.arange(total) - np.repeat(
                np.cumsum(counts) - counts, counts
            )
            nbr = adj_indices[np.repeat(adj_indptr[frontier], counts) + offsets]
            cand = nbr[in_ball[nbr] & ~visited[nbr]]
            if cand.size == 0:
                break
            cand = np.unique(cand)
            visited[cand] = True
            reached.append(cand)
            frontier = cand
        members = (
            np.sort(np.concatenate(reached)) if reached else np.zeros(0, np.int64)
        )
        per_face[i] = members
        in_ball[ball] = False
        visited[i] = False
        if members.size:
            visited[members] = False

    counts = np.array([m.size for m in per_face], dtype=np.int64)
    indptr[1:] = np.cumsum(counts)
    indices = (
        np.concatenate(per_face) if indptr[-1] else np.zeros(0, np.int64)
    )
    rows = np.repeat(np.arange(n_f), counts)
    dists = np.linalg.norm(centroids[indices] - centroids[rows], axis=1)
    weights = np.exp(-(dists**2) / (2.0 * eta**2))
    return NeighborhoodTable(indptr, indices, weights, eta)


def average_centroid_spacing(mesh, geom):
    """Mean centroid distance over edge-adjacent face pairs.

    Each unordered pair of faces sharing an edge is counted once. This is
    the reference unit for specifying the spatial parameter of the filter.

    Raises
    ------
    ValueError
        If the mesh has no edge-adjacent face pair.
    """
    faces = mesh.faces
    n_f = len(faces)
    if n_f:
        edges = np.concatenate(
            [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]
        )
        edges = np.sort(edges, axis=1)
        face_of = np.tile(np.arange(n_f), 3)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        face_of = face_of[order]
        new_group = np.ones(len(edges), dtype=bool)
        new_group[1:] = (edges[1:] != edges[:-1]).any(axis=1)
        group_starts = np.nonzero(new_group)[0]
        group_ends = np.append(group_starts[1:], len(edges))
        pair_a, pair_b = [], []
        for s, e in zip(group_starts, group_ends):
            if e - s < 2:
                continue
            group = face_of[s:e]
            for u in range(len(group)):
                for w in range(u + 1, len(group)):
                    pair_a.append(group[u])
                    pair_b.append(group[w])
        if pair_a:
            a = np.array(pair_a)
            b = np.array(pair_b)
            d = np.linalg.norm(geom.centroids[a] - geom.centroids[b], axis=1)
            return float(d.mean())
    raise ValueError("mesh has no edge-adjacent face pair")
