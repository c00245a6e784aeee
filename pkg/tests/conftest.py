import numpy as np
import pytest

from sdmesh import TriMesh


def outward_cross(a, b, c):
    # orientation convention used across the package: first minus second
    # crossed with third minus second
    return np.cross(np.asarray(a) - np.asarray(b), np.asarray(c) - np.asarray(b))


def quad_to_tris(quad, outward):
    """Split a 4-corner quad into two triangles wound so their normals
    point along ``outward``."""
    tris = []
    for tri in ((quad[0], quad[1], quad[2]), (quad[0], quad[2], quad[3])):
        tris.append(tri)
    return [_orient(t, outward) for t in tris]


def _orient(tri, outward):
    return tri if np.dot(outward_cross(*tri), outward) > 0 else tri[::-1]


def make_unit_cube():
    """Unit cube [0,1]^3, 12 faces, wound so normals point outward."""
    v = np.array(
        [
            [0, 0, 0],
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 0, 1],
            [1, 1, 1],
            [0, 1, 1],
        ],
        dtype=float,
    )
    quads = [
        ((0, 1, 2, 3), (0, 0, -1)),
        ((4, 5, 6, 7), (0, 0, 1)),
        ((0, 1, 5, 4), (0, -1, 0)),
        ((2, 3, 7, 6), (0, 1, 0)),
        ((1, 2, 6, 5), (1, 0, 0)),
        ((0, 3, 7, 4), (-1, 0, 0)),
    ]
    faces = []
    for quad, outward in quads:
        corners = [v[i] for i in quad]
        for tri in quad_to_tris(corners, np.array(outward, float)):
            faces.append([_vertex_id(v, p) for p in tri])
    return TriMesh(v, np.array(faces))


def _vertex_id(vertices, p):
    return int(np.nonzero((vertices == np.asarray(p)).all(axis=1))[0][0])


def make_grid_strip(n_quads=4, spacing=1.0):
    """Flat strip of 2*n_quads right triangles in the z=0 plane."""
    xs = np.arange(n_quads + 1) * spacing
    verts = []
    for y in (0.0, spacing):
        for x in xs:
            verts.append([x, y, 0.0])
    verts = np.array(verts)
    faces = []
    for i in range(n_quads):
        a, b = i, i + 1
        c, d = i + n_quads + 1, i + n_quads + 2
        faces.append([a, b, d])
        faces.append([a, d, c])
    return TriMesh(verts, np.array(faces))


def make_grid_plane(nx, ny, spacing=1.0):
    """Flat (nx x ny)-quad grid in the z=0 plane, split into triangles."""
    verts = np.array(
        [[x * spacing, y * spacing, 0.0] for y in range(ny + 1) for x in range(nx + 1)]
    )
    faces = []
    row = nx + 1
    for y in range(ny):
        for x in range(nx):
            a = y * row + x
            b = a + 1
            c = a + row
            d = c + 1
            faces.append([a, b, d])
            faces.append([a, d, c])
    return TriMesh(verts, np.array(faces))


def make_two_triangles(centroid_distance=None):
    """Two coplanar triangles sharing an edge, optionally scaled so the
    centroid distance matches the requested value."""
    verts = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]
    )
    faces = np.array([[0, 1, 2], [1, 3, 2]])
    mesh = TriMesh(verts, faces)
    if centroid_distance is not None:
        c0 = verts[faces[0]].mean(axis=0)
        c1 = verts[faces[1]].mean(axis=0)
        scale = centroid_distance / np.linalg.norm(c1 - c0)
        mesh = TriMesh(verts * scale, faces)
    return mesh


def random_rotation(rng):
    """Uniformly distributed rotation matrix."""
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
