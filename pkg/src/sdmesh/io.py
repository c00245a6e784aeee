"""Mesh and raster I/O, synthetic test meshes, and noise models.

Wavefront OBJ is the only mesh interchange format (``v``/``vt``/``f``
records; normals in files are ignored and always recomputed from the
geometry). Raster images are 8-bit RGB PNG or binary PPM.
"""

import warnings

import numpy as np
from PIL import Image

from .mesh import TriMesh, average_centroid_spacing, compute_face_geometry

__all__ = [
    "load_mesh",
    "save_mesh",
    "load_image",
    "save_image",
    "make_synthetic",
    "add_normal_noise",
]


def load_mesh(path):
    """Parse a Wavefront OBJ file.

    Supports ``v``, ``vt``, and ``f`` records, both 1-based and negative
    (relative) indices, and fan-triangulates convex polygons at their
    first vertex. Texture coordinates are preserved per corner. Other
    record types are ignored.

    Returns
    -------
    TriMesh
        With ``uv`` attached when every face carries texture indices.

    Raises
    ------
    ValueError
        On malformed records, reported with their line number.
    """
    vertices = []
    texcoords = []
    tri_vertex = []
    tri_uv = []
    any_missing_uv = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag, args = parts[0], parts[1:]
            try:
                if tag == "v":
                    vertices.append([float(x) for x in args[:3]])
                    if len(args) < 3:
                        raise ValueError("vertex needs 3 coordinates")
                elif tag == "vt":
                    if len(args) < 2:
                        raise ValueError("texture coordinate needs 2 values")
                    texcoords.append([float(x) for x in args[:2]])
                elif tag == "f":
                    if len(args) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    corners = [_parse_corner(tok) for tok in args]
                    vs = [_resolve(c[0], len(vertices), lineno) for c in corners]
                    ts = [
                        None
                        if c[1] is None
                        else _resolve(c[1], len(texcoords), lineno)
                        for c in corners
                    ]
                    for k in range(1, len(vs) - 1):
                        tri_vertex.append([vs[0], vs[k], vs[k + 1]])
                        tri_uv.append([ts[0], ts[k], ts[k + 1]])
                        if any(t is None for t in tri_uv[-1]):
                            any_missing_uv = True
            except (ValueError, IndexError) as err:
                raise ValueError(f"{path}: line {lineno}: {err}") from None
    vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.array(tri_vertex, dtype=np.int64).reshape(-1, 3)
    uv = None
    if tri_vertex and not any_missing_uv:
        tex = np.array(texcoords, dtype=np.float64).reshape(-1, 2)
        uv = tex[np.array(tri_uv, dtype=np.int64)]
    elif any(t is not None for face in tri_uv for t in face):
        warnings.warn(f"{path}: partial texture coordinates dropped")
    return TriMesh(vertices, faces, uv=uv)


def _parse_corner(token):
    fields = token.split("/")
    v = int(fields[0])
    t = int(fields[1]) if len(fields) > 1 and fields[1] else None
    return v, t


def _resolve(index, count, lineno):
    if index > 0:
        resolved = index - 1
    elif index < 0:
        resolved = count + index
    else:
        raise ValueError("OBJ indices are 1-based; 0 is invalid")
    if not 0 <= resolved < count:
        raise ValueError(f"index {index} out of range")
    return resolved


def save_mesh(mesh, path):
    """Write a mesh as Wavefront OBJ (9 significant digits).

    Texture coordinates, when present, are written one record per corner.
    ``load_mesh(save_mesh(m))`` reproduces vertices to 1e-6.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        if mesh.uv is not None:
            for face_uv in mesh.uv:
                for u, w in face_uv:
                    fh.write(f"vt {u:.9g} {w:.9g}\n")
            for i, face in enumerate(mesh.faces):
                t = 3 * i
                fh.write(
                    f"f {face[0] + 1}/{t + 1} {face[1] + 1}/{t + 2} "
                    f"{face[2] + 1}/{t + 3}\n"
                )
        else:
            for face in mesh.faces:
                fh.write(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}\n")


def load_image(path):
    """Read an RGB raster (PNG or binary PPM) as floats in [0, 1]."""
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    return rgb / 255.0


def save_image(image, path):
    """Write floats in [0, 1] as an 8-bit RGB raster (PNG or binary PPM)."""
    data = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray((data * 255.0).round().astype(np.uint8), "RGB").save(path)


def make_synthetic(kind, **params):
    """Deterministic synthetic test meshes.

    Kinds
    -----
    ``"sphere-bumps"``
        Icosphere with compactly supported radial bumps:
        ``subdivisions`` (default 3), ``radius`` (1.0), ``bumps`` — list of
        ``(direction, width, amplitude)`` with arc-length width, or
        ``(direction, width, amplitude, "plateau")`` for a flat-topped boss
        with a steep rim — or seeded placement via ``n_bumps``,
        ``bump_width``, ``bump_amplitude``, ``seed``.
    ``"cube-bumps"``
        Cube surface grid with a tapered sinusoidal height field per side:
        ``resolution`` (quads per side, default 16), ``size`` (1.0),
        ``amplitude`` (0.0), ``waves`` (2), ``seed`` (phase offsets).
    ``"plane-checker"``
        Flat grid over ``[0, size]^2`` with a sinusoidal checker height
        field and unit-square texture coordinates: ``resolution`` (32),
        ``size`` (1.0), ``amplitude`` (0.0), ``period`` (size/4).
    ``"knot-like-torus"``
        Tube swept along a (p, q) torus knot: ``p`` (2), ``q`` (3),
        ``ring_radius`` (1.0), ``knot_radius`` (0.35), ``tube_radius``
        (0.12), ``path_segments`` (200), ``tube_segments`` (24).
    """
    builders = {
        "sphere-bumps": _sphere_bumps,
        "cube-bumps": _cube_bumps,
        "plane-checker": _plane_checker,
        "knot-like-torus": _knot_torus,
    }
    if kind not in builders:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    return builders[kind](**params)


def add_normal_noise(mesh, sigma, seed=0):
    """Displace vertices along their normals by Gaussian noise.

    Each vertex moves along its area-weighted vertex normal by a Gaussian
    amount with standard deviation ``sigma`` times the average centroid
    spacing of the mesh. Deterministic for a fixed seed.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return mesh.with_vertices(mesh.vertices.copy())
    geom = compute_face_geometry(mesh, on_degenerate="skip")
    lc = average_centroid_spacing(mesh, geom)
    normals = _vertex_normals(mesh, geom)
    rng = np.random.default_rng(seed)
    offsets = rng.standard_normal(mesh.n_vertices) * (sigma * lc)
    return mesh.with_vertices(mesh.vertices + offsets[:, None] * normals)


def _vertex_normals(mesh, geom):
    acc = np.zeros((mesh.n_vertices, 3))
    weighted = geom.normals * geom.areas[:, None]
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], weighted)
    norms = np.linalg.norm(acc, axis=1)
    norms[norms == 0] = 1.0
    return acc / norms[:, None]


def _orient_outward(tri, vertices, outward):
    a, b, c = (vertices[i] for i in tri)
    if np.dot(np.cross(a - b, c - b), outward) >= 0:
        return tri
    return tri[::-1]


def _icosphere(subdivisions, radius):
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    faces = [
        _orient_outward(list(f), verts, verts[list(f)].mean(axis=0))
        for f in faces
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces.extend(
                [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
            )
        faces = next_faces
    return np.array(verts) * radius, np.array(faces, dtype=np.int64)


def _sphere_bumps(
    subdivisions=3,
    radius=1.0,
    bumps=None,
    n_bumps=0,
    bump_width=0.2,
    bump_amplitude=0.0,
    seed=0,
):
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    verts, faces = _icosphere(subdivisions, radius)
    if bumps is None:
        rng = np.random.default_rng(seed)
        bumps = []
        for _ in range(n_bumps):
            d = rng.standard_normal(3)
            bumps.append((d / np.linalg.norm(d), bump_width, bump_amplitude))
    dirs = verts / np.linalg.norm(verts, axis=1)[:, None]
    displacement = np.zeros(len(verts))
    for bump in bumps:
        direction, width, amplitude = bump[:3]
        profile = bump[3] if len(bump) > 3 else "cosine"
        if amplitude == 0.0:
            continue
        direction = np.asarray(direction, dtype=np.float64)
        direction = direction / np.linalg.norm(direction)
        ang = np.arccos(np.clip(dirs @ direction, -1.0, 1.0))
        arc = ang * radius
        inside = arc < width
        if profile == "cosine":
            shape = 0.5 * (1.0 + np.cos(np.pi * arc[inside] / width))
        elif profile == "plateau":
            # flat top over 80% of the support, cosine ramp to zero outside
            ramp = np.clip((arc[inside] - 0.8 * width) / (0.2 * width), 0.0, 1.0)
            shape = 0.5 * (1.0 + np.cos(np.pi * ramp))
        else:
            raise ValueError(f"unknown bump profile {profile!r}")
        displacement[inside] += amplitude * shape
    return TriMesh(verts + displacement[:, None] * dirs, faces)


def _cube_bumps(resolution=16, size=1.0, amplitude=0.0, waves=2, seed=0):
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    n = resolution
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(6, 2))
    sides = [
        # (axis fixed, sign, axis u, axis v)
        (0, -1, 1, 2), (0, 1, 1, 2),
        (1, -1, 0, 2), (1, 1, 0, 2),
        (2, -1, 0, 1), (2, 1, 0, 1),
    ]
    key_to_id = {}
    verts = []
    faces = []

    def vertex_id(p):
        key = tuple(np.round(p, 12))
        if key not in key_to_id:
            key_to_id[key] = len(verts)
            verts.append(np.asarray(p, dtype=np.float64))
        return key_to_id[key]

    ticks = np.linspace(0.0, 1.0, n + 1)
    for side_idx, (axis, sign, ua, va) in enumerate(sides):
        outward = np.zeros(3)
        outward[axis] = sign
        grid = np.empty((n + 1, n + 1), dtype=np.int64)
        for iu, u in enumerate(ticks):
            for iv, v in enumerate(ticks):
                p = np.empty(3)
                p[axis] = 0.5 * sign * size
                p[ua] = (u - 0.5) * size
                p[va] = (v - 0.5) * size
                taper = np.sin(np.pi * u) * np.sin(np.pi * v)
                height = (
                    amplitude
                    * taper
                    * np.sin(waves * np.pi * u + phases[side_idx, 0])
                    * np.sin(waves * np.pi * v + phases[side_idx, 1])
                )
                grid[iu, iv] = vertex_id(p + height * outward)
        for iu in range(n):
            for iv in range(n):
                a, b = grid[iu, iv], grid[iu + 1, iv]
                c, d = grid[iu + 1, iv + 1], grid[iu, iv + 1]
                for tri in ((a, b, c), (a, c, d)):
                    faces.append(_orient_outward(list(tri), verts, outward))
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))


def _plane_checker(resolution=32, size=1.0, amplitude=0.0, period=None):
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if period is None:
        period = size / 4.0
    n = resolution
    ticks = np.linspace(0.0, size, n + 1)
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    zz = amplitude * np.sin(2 * np.pi * xx / period) * np.sin(2 * np.pi * yy / period)
    verts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = a + n + 1
            c = b + 1
            d = a + 1
            # wound so the flat plane's normals point along +z
            faces.append([c, b, a])
            faces.append([d, c, a])
    faces = np.array(faces, dtype=np.int64)
    uv = (verts[faces][:, :, :2] / size).copy()
    return TriMesh(verts, faces, uv=uv)


def _knot_torus(
    p=2,
    q=3,
    ring_radius=1.0,
    knot_radius=0.35,
    tube_radius=0.12,
    path_segments=200,
    tube_segments=24,
):
    if path_segments < 3 or tube_segments < 3:
        raise ValueError("need at least 3 segments along path and tube")
    t = np.linspace(0.0, 2.0 * np.pi, path_segments, endpoint=False)
    centers = np.column_stack(
        [
            (ring_radius + knot_radius * np.cos(q * t)) * np.cos(p * t),
            (ring_radius + knot_radius * np.cos(q * t)) * np.sin(p * t),
            knot_radius * np.sin(q * t),
        ]
    )
    tangents = np.roll(centers, -1, axis=0) - np.roll(centers, 1, axis=0)
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]
    # parallel-transport frames, then spread the closure twist evenly
    normals = np.empty_like(centers)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(ref, tangents[0])) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    normals[0] = ref - np.dot(ref, tangents[0]) * tangents[0]
    normals[0] /= np.linalg.norm(normals[0])
    for i in range(1, path_segments):
        n = normals[i - 1] - np.dot(normals[i - 1], tangents[i]) * tangents[i]
        normals[i] = n / np.linalg.norm(n)
    closing = normals[-1] - np.dot(normals[-1], tangents[0]) * tangents[0]
    closing /= np.linalg.norm(closing)
    binorm0 = np.cross(tangents[0], normals[0])
    twist = np.arctan2(np.dot(closing, binorm0), np.dot(closing, normals[0]))
    binormals = np.cross(tangents, normals)
    angles = -twist * np.arange(path_segments) / path_segments
    normals = (
        np.cos(angles)[:, None] * normals + np.sin(angles)[:, None] * binormals
    )
    binormals = np.cross(tangents, normals)

    theta = np.linspace(0.0, 2.0 * np.pi, tube_segments, endpoint=False)
    verts = (
        centers[:, None, :]
        + tube_radius
        * (
            np.cos(theta)[None, :, None] * normals[:, None, :]
            + np.sin(theta)[None, :, None] * binormals[:, None, :]
        )
    ).reshape(-1, 3)
    faces = []
    for i in range(path_segments):
        i2 = (i + 1) % path_segments
        for j in range(tube_segments):
            j2 = (j + 1) % tube_segments
            a = i * tube_segments + j
            b = i2 * tube_segments + j
            c = i2 * tube_segments + j2
            d = i * tube_segments + j2
            outward = verts[a] - centers[i]
            faces.append(_orient_outward([a, b, c], verts, outward))
            faces.append(_orient_outward([a, c, d], verts, outward))
    return TriMesh(verts, np.array(faces, dtype=np.int64))
