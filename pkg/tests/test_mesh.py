import numpy as np
import pytest

from sdmesh import (
    TriMesh,
    DegenerateFaceError,
    average_centroid_spacing,
    build_neighborhoods,
    compute_face_geometry,
)

from conftest import (
    make_grid_plane,
    make_grid_strip,
    make_two_triangles,
    make_unit_cube,
    random_rotation,
)


def brute_force_ball_neighbors(mesh, geom, eta):
    """O(n^2) oracle: all pairs within 3*eta, connectivity ignored."""
    c = geom.centroids
    out = []
    for i in range(mesh.n_faces):
        d = np.linalg.norm(c - c[i], axis=1)
        members = np.nonzero((d <= 3 * eta) & (np.arange(mesh.n_faces) != i))[0]
        out.append(set(members.tolist()))
    return out


class TestTriMesh:
    def test_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            TriMesh(np.zeros((2, 3)), [[0, 1, 2]])

    def test_rejects_repeated_vertex_in_face(self):
        with pytest.raises(ValueError):
            TriMesh(np.eye(3), [[0, 1, 1]])

    def test_warns_on_inconsistent_orientation(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
        # second face reversed: the shared edge appears twice in the same
        # direction
        faces = [[0, 1, 2], [1, 2, 3]]
        with pytest.warns(UserWarning, match="orientation"):
            TriMesh(verts, faces)

    def test_adjacency_is_symmetric_and_selfless(self):
        mesh = make_unit_cube()
        for i in range(mesh.n_faces):
            nbrs = mesh.face_neighbors(i)
            assert i not in nbrs
            for j in nbrs:
                assert i in mesh.face_neighbors(j)

    def test_adjacency_uses_vertex_sharing(self):
        mesh = make_grid_strip(3)
        # faces 0 and 2 share exactly one vertex, no edge
        shared = set(mesh.faces[0]) & set(mesh.faces[2])
        assert len(shared) == 1
        assert 2 in mesh.face_neighbors(0)

    def test_with_vertices_shares_connectivity(self):
        mesh = make_unit_cube()
        moved = mesh.with_vertices(mesh.vertices + 1.0)
        assert moved.faces is mesh.faces
        assert moved.adj_indices is mesh.adj_indices
        assert np.allclose(moved.vertices, mesh.vertices + 1.0)


class TestFaceGeometry:
    def test_single_face_normal_area_centroid(self):
        mesh = TriMesh(
            np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), [[0, 1, 2]]
        )
        geom = compute_face_geometry(mesh)
        assert np.allclose(geom.normals[0], [0, 0, -1])
        assert np.isclose(geom.areas[0], 0.5)
        assert np.allclose(geom.centroids[0], [1 / 3, 1 / 3, 0])

    def test_reversed_winding_flips_normal(self):
        mesh = TriMesh(
            np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), [[2, 1, 0]]
        )
        geom = compute_face_geometry(mesh)
        assert np.allclose(geom.normals[0], [0, 0, 1])

    def test_unit_cube_against_analytic_geometry(self):
        mesh = make_unit_cube()
        geom = compute_face_geometry(mesh)
        assert np.isclose(geom.areas.sum(), 6.0)
        for i in range(mesh.n_faces):
            n = geom.normals[i]
            axis = np.argmax(np.abs(n))
            assert np.allclose(np.abs(n), np.eye(3)[axis], atol=1e-12)
            # outward: the face lies on the cube side the normal points at
            coord = geom.centroids[i][axis]
            assert np.isclose(coord, 1.0 if n[axis] > 0 else 0.0)
            # independent area check: Heron's formula
            a, b, c = mesh.vertices[mesh.faces[i]]
            la, lb, lc = (
                np.linalg.norm(b - c),
                np.linalg.norm(a - c),
                np.linalg.norm(a - b),
            )
            s = (la + lb + lc) / 2
            heron = np.sqrt(s * (s - la) * (s - lb) * (s - lc))
            assert np.isclose(geom.areas[i], heron)

    def test_unit_normals(self):
        mesh = make_unit_cube()
        geom = compute_face_geometry(mesh)
        assert np.allclose(np.linalg.norm(geom.normals, axis=1), 1.0, atol=1e-12)
        assert (geom.areas > 0).all()

    def test_degenerate_face_reported_with_index(self):
        verts = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0], [3, 0, 0]], float
        )
        mesh = TriMesh(verts, [[0, 1, 2], [1, 0, 3]])  # second face colinear
        with pytest.raises(DegenerateFaceError) as err:
            compute_face_geometry(mesh)
        assert err.value.face_indices == [1]
        geom = compute_face_geometry(mesh, on_degenerate="skip")
        assert geom.degenerate.tolist() == [False, True]
        assert geom.areas[1] == 0.0

    def test_area_sum_invariant_under_cyclic_reorder(self):
        mesh = make_unit_cube()
        rolled = TriMesh(mesh.vertices, np.roll(mesh.faces, 1, axis=1))
        g0 = compute_face_geometry(mesh)
        g1 = compute_face_geometry(rolled)
        assert np.isclose(g0.areas.sum(), g1.areas.sum())
        assert np.allclose(g0.normals, g1.normals)


class TestNeighborhoods:
    def test_two_adjacent_triangles(self):
        mesh = make_two_triangles()
        geom = compute_face_geometry(mesh)
        d = np.linalg.norm(geom.centroids[1] - geom.centroids[0])
        table = build_neighborhoods(mesh, geom, eta=d)
        idx0, w0 = table.neighbors(0)
        idx1, w1 = table.neighbors(1)
        assert idx0.tolist() == [1] and idx1.tolist() == [0]
        assert np.isclose(w0[0], np.exp(-0.5))
        assert np.isclose(w1[0], np.exp(-0.5))

    def test_tiny_eta_gives_empty_lists(self):
        mesh = make_two_triangles()
        geom = compute_face_geometry(mesh)
        table = build_neighborhoods(mesh, geom, eta=1e-9)
        assert table.indices.size == 0
        assert np.diff(table.indptr).tolist() == [0, 0]

    def test_strip_matches_brute_force_scan(self):
        mesh = make_grid_strip(4)
        geom = compute_face_geometry(mesh)
        lc = average_centroid_spacing(mesh, geom)
        table = build_neighborhoods(mesh, geom, eta=lc)
        oracle = brute_force_ball_neighbors(mesh, geom, lc)
        for i in range(mesh.n_faces):
            idx, _ = table.neighbors(i)
            # flat connected strip: the BFS reaches the whole ball
            assert set(idx.tolist()) == oracle[i]

    def test_grid_plane_matches_brute_force(self):
        mesh = make_grid_plane(4, 4)
        geom = compute_face_geometry(mesh)
        table = build_neighborhoods(mesh, geom, eta=0.7)
        oracle = brute_force_ball_neighbors(mesh, geom, 0.7)
        for i in range(mesh.n_faces):
            idx, _ = table.neighbors(i)
            assert set(idx.tolist()) == oracle[i]

    def test_invariants(self):
        mesh = make_unit_cube()
        geom = compute_face_geometry(mesh)
        eta = 0.4
        table = build_neighborhoods(mesh, geom, eta)
        rows = table.pair_rows()
        dists = np.linalg.norm(
            geom.centroids[table.indices] - geom.centroids[rows], axis=1
        )
        assert (dists <= 3 * eta + 1e-12).all()
        assert (table.indices != rows).all()
        assert (table.weights > 0).all()

    def test_rejects_nonpositive_eta(self):
        mesh = make_two_triangles()
        geom = compute_face_geometry(mesh)
        with pytest.raises(ValueError):
            build_neighborhoods(mesh, geom, 0.0)

    def test_rigid_motion_invariance(self, rng):
        mesh = make_grid_plane(3, 3)
        geom = compute_face_geometry(mesh)
        rot = random_rotation(rng)
        moved = mesh.with_vertices(mesh.vertices @ rot.T + np.array([3.0, -1.0, 2.0]))
        geom2 = compute_face_geometry(moved)
        assert np.allclose(geom2.areas, geom.areas)
        assert np.allclose(geom2.normals, geom.normals @ rot.T, atol=1e-12)
        t1 = build_neighborhoods(mesh, geom, 0.8)
        t2 = build_neighborhoods(moved, geom2, 0.8)
        assert np.array_equal(t1.indptr, t2.indptr)
        assert np.array_equal(t1.indices, t2.indices)
        assert np.allclose(t1.weights, t2.weights)


class TestCentroidSpacing:
    def test_two_triangles_known_distance(self):
        mesh = make_two_triangles(centroid_distance=0.4)
        geom = compute_face_geometry(mesh)
        assert np.isclose(average_centroid_spacing(mesh, geom), 0.4)

    def test_cube_matches_enumeration(self):
        mesh = make_unit_cube()
        geom = compute_face_geometry(mesh)
        # oracle: enumerate unordered edge-sharing pairs exhaustively
        pairs = set()
        for i in range(mesh.n_faces):
            for j in range(i + 1, mesh.n_faces):
                if len(set(mesh.faces[i]) & set(mesh.faces[j])) == 2:
                    pairs.add((i, j))
        dists = [
            np.linalg.norm(geom.centroids[i] - geom.centroids[j]) for i, j in pairs
        ]
        assert np.isclose(average_centroid_spacing(mesh, geom), np.mean(dists))

    def test_scales_linearly(self):
        mesh = make_unit_cube()
        geom = compute_face_geometry(mesh)
        base = average_centroid_spacing(mesh, geom)
        scaled = mesh.with_vertices(mesh.vertices * 2.5)
        geom2 = compute_face_geometry(scaled)
        assert np.isclose(average_centroid_spacing(scaled, geom2), 2.5 * base)

    def test_single_face_errors(self):
        mesh = TriMesh(np.eye(3), [[0, 1, 2]])
        geom = compute_face_geometry(mesh)
        with pytest.raises(ValueError):
            average_centroid_spacing(mesh, geom)
