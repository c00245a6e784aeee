import numpy as np
import pytest

from sdmesh import (
    average_centroid_spacing,
    compute_face_geometry,
)
from sdmesh.io import add_normal_noise, make_synthetic
from sdmesh.multiscale import (
    RegionMask,
    combine,
    combine_texture,
    decompose,
    load_decomposition,
    save_decomposition,
)
from sdmesh.solver import FilterParams


def small_decomposition(levels=2):
    mesh = add_normal_noise(
        make_synthetic("sphere-bumps", subdivisions=2), 0.2, seed=4
    )
    geom = compute_face_geometry(mesh)
    lc = average_centroid_spacing(mesh, geom)
    schedule = [
        FilterParams(lam=1.0 + k, eta=2 * lc, mu=0.8, nu=0.5, max_iters=20)
        for k in range(levels)
    ]
    return mesh, decompose(mesh, schedule)


def two_scale_instance():
    """Sphere with a lattice of tiny bumps and one gentle polar cap."""
    base = make_synthetic("sphere-bumps", subdivisions=5)
    g0 = compute_face_geometry(base)
    lc = average_centroid_spacing(base, g0)
    pole = np.array([0.0, 0.0, 1.0])
    w_l, w_s = 10 * lc, lc
    a_l, a_s = 0.035, 0.004
    spacing = 2.2 * w_s
    centers, signs = [], []
    for row, th in enumerate(
        np.arange(np.deg2rad(50), np.deg2rad(130), spacing)
    ):
        n_k = max(int(2 * np.pi * np.sin(th) / spacing), 1)
        for j in range(n_k):
            ph = 2 * np.pi * j / n_k + (row % 2) * np.pi / n_k
            centers.append(
                np.array(
                    [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
                )
            )
            signs.append(1 if (row + j) % 2 == 0 else -1)
    bumps = [(pole, w_l, a_l)] + [
        (c, w_s, s * a_s) for s, c in zip(signs, centers)
    ]
    mesh = make_synthetic("sphere-bumps", subdivisions=5, bumps=bumps)
    return mesh, lc, pole, w_l


class TestDecompose:
    def test_empty_schedule(self):
        mesh = make_synthetic("sphere-bumps", subdivisions=1)
        decomp = decompose(mesh, [])
        assert decomp.levels == 0
        assert decomp.base is mesh
        out = combine(decomp, [])
        assert np.abs(out.vertices - mesh.vertices).max() < 1e-9

    def test_identity_filter_level(self):
        mesh = make_synthetic("sphere-bumps", subdivisions=2)
        geom = compute_face_geometry(mesh)
        lc = average_centroid_spacing(mesh, geom)
        decomp = decompose(
            mesh, [FilterParams(lam=0.0, eta=2 * lc, mu=0.5, nu=0.5)]
        )
        diag = mesh.bounding_box_diagonal()
        assert np.abs(decomp.vertex_deltas[0]).max() < 1e-6 * diag

    def test_two_scale_delta_localization(self):
        mesh, lc, pole, w_l = two_scale_instance()
        dirs = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1)[:, None]
        cap = np.arccos(np.clip(dirs @ pole, -1, 1)) < 1.5 * w_l
        colat = np.arccos(np.clip(dirs[:, 2], -1, 1))
        band = (colat > np.deg2rad(47)) & (colat < np.deg2rad(133))
        schedule = [
            FilterParams(lam=50.0, eta=3 * lc, mu=1.5, nu=0.15),
            FilterParams(lam=100.0, eta=3 * lc, mu=2.5, nu=1.0),
        ]
        decomp = decompose(mesh, schedule)
        coarse = (decomp.vertex_deltas[0] ** 2).sum(axis=1)
        fine = (decomp.vertex_deltas[1] ** 2).sum(axis=1)
        assert coarse[cap].sum() / coarse.sum() > 0.7
        assert fine[band].sum() / fine.sum() > 0.7

    def test_telescoping_identity(self):
        mesh, decomp = small_decomposition()
        recon = decomp.base.vertices + decomp.vertex_deltas.sum(axis=0)
        assert np.abs(recon - mesh.vertices).max() < 1e-12


class TestCombine:
    def test_all_ones_recovers_original(self):
        mesh, decomp = small_decomposition()
        out = combine(decomp, [1.0, 1.0])
        diag = mesh.bounding_box_diagonal()
        rms = np.sqrt(((out.vertices - mesh.vertices) ** 2).sum(axis=1).mean())
        assert rms < 1e-6 * diag

    def test_all_zeros_returns_base(self):
        mesh, decomp = small_decomposition()
        out = combine(decomp, [0.0, 0.0])
        diag = mesh.bounding_box_diagonal()
        rms = np.sqrt(((out.vertices - decomp.base.vertices) ** 2).sum(axis=1).mean())
        assert rms < 1e-6 * diag

    def test_boosted_fine_level_amplifies_detail(self):
        mesh, lc, pole, w_l = two_scale_instance()
        schedule = [
            FilterParams(lam=50.0, eta=3 * lc, mu=1.5, nu=0.15),
        ]
        decomp = decompose(mesh, schedule)
        boosted = combine(decomp, [2.0])
        # the band detail doubles: compare detail amplitudes against the
        # filtered base
        detail0 = mesh.vertices - decomp.base.vertices
        detail2 = boosted.vertices - decomp.base.vertices
        dirs = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1)[:, None]
        colat = np.arccos(np.clip(dirs[:, 2], -1, 1))
        band = (colat > np.deg2rad(47)) & (colat < np.deg2rad(133))
        e0 = (detail0[band] ** 2).sum()
        e2 = (detail2[band] ** 2).sum()
        assert 3.0 < e2 / e0 < 5.0  # amplitude x2 means energy x4

    def test_affine_in_alpha(self):
        mesh, decomp = small_decomposition()
        a = np.array([0.7, -0.3])
        b = np.array([0.4, 1.1])
        va, na = decomp.targets(a)
        vb, nb = decomp.targets(b)
        v0, n0 = decomp.targets(np.zeros(2))
        vab, nab = decomp.targets(a + b)
        assert np.abs(vab - (va + vb - v0)).max() < 1e-12
        assert np.abs(nab - (na + nb - n0)).max() < 1e-12

    def test_wrong_alpha_length(self):
        _, decomp = small_decomposition()
        with pytest.raises(ValueError):
            combine(decomp, [1.0])

    def test_masked_targets_revert_outside(self):
        mesh, decomp = small_decomposition()
        region_faces = np.arange(decomp.base.n_faces // 3)
        mask = RegionMask.from_faces(decomp.base, region_faces)
        v, n = decomp.targets([2.0, 2.0], mask=mask)
        outside_v = ~mask.vertex_mask
        outside_f = ~mask.face_mask
        assert np.array_equal(v[outside_v], decomp.original.vertices[outside_v])
        assert np.array_equal(n[outside_f], decomp.normals[-1][outside_f])
        # inside, targets differ from the original
        assert np.abs(
            v[mask.vertex_mask] - decomp.original.vertices[mask.vertex_mask]
        ).max() > 1e-8

    def test_mask_face_consistency(self):
        mesh = make_synthetic("sphere-bumps", subdivisions=1)
        mask = RegionMask.from_vertices(mesh, np.arange(mesh.n_vertices // 2))
        expected = mask.vertex_mask[mesh.faces].all(axis=1)
        assert np.array_equal(mask.face_mask, expected)


class TestCombineTexture:
    def test_all_ones_returns_finest(self):
        rng = np.random.default_rng(0)
        levels = [rng.random((20, 3)) for _ in range(4)]
        out = combine_texture(levels, [1.0, 1.0, 1.0])
        assert np.abs(out - levels[-1]).max() < 1e-12

    def test_all_zeros_returns_base(self):
        rng = np.random.default_rng(1)
        levels = [rng.random((20, 3)) for _ in range(3)]
        out = combine_texture(levels, [0.0, 0.0])
        assert np.array_equal(out, levels[0])

    def test_clamps_to_valid_range(self):
        levels = [np.full((4, 3), 0.05), np.full((4, 3), 0.2)]
        out = combine_texture(levels, [-1.0])  # 0.05 - 0.15 = -0.1
        assert out.min() == 0.0
        out_hi = combine_texture(
            [np.full((4, 3), 0.9), np.full((4, 3), 1.0)], [2.0]
        )
        assert out_hi.max() == 1.0

    def test_level_count_mismatch(self):
        with pytest.raises(ValueError):
            combine_texture([np.zeros((4, 3))] * 3, [1.0])


class TestManifest:
    def test_round_trip(self, tmp_path):
        mesh, decomp = small_decomposition()
        save_decomposition(decomp, tmp_path / "scales")
        loaded = load_decomposition(tmp_path / "scales")
        assert loaded.levels == decomp.levels
        assert np.abs(
            loaded.base.vertices - decomp.base.vertices
        ).max() < 1e-6
        # float32 storage bounds the delta error
        assert np.abs(
            loaded.vertex_deltas - decomp.vertex_deltas
        ).max() < 1e-6
        out = combine(loaded, [1.0, 1.0])
        diag = mesh.bounding_box_diagonal()
        rms = np.sqrt(((out.vertices - mesh.vertices) ** 2).sum(axis=1).mean())
        assert rms < 1e-5 * diag

    def test_manifest_layout(self, tmp_path):
        mesh, decomp = small_decomposition()
        out = tmp_path / "scales"
        save_decomposition(decomp, out)
        assert (out / "manifest.json").exists()
        import json

        index = json.loads((out / "manifest.json").read_text())
        assert index["levels"] == 2
        assert len(index["meshes"]) == 3
        blob = np.fromfile(out / index["vertex_deltas"][0], dtype="<f4")
        assert blob.size == decomp.base.n_vertices * 3
