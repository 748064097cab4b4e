"""Procedurally generated meshes used by the test-suite, examples and CLI
demos: spheres, tori, cylinders, grids and a genus-2 surface, plus a few
quad meshes for the quality metrics.

Triangle shapes return :class:`~crossfield.mesh.TriMesh`; quad shapes
return plain ``(vertices, faces)`` arrays with 4 indices per face.
"""

from __future__ import annotations

import math

import numpy as np

from .mesh import TriMesh

__all__ = [
    "icosahedron",
    "icosphere",
    "uv_sphere",
    "bumpy_sphere",
    "torus",
    "capped_cylinder",
    "flat_grid",
    "genus2_surface",
    "quad_grid",
    "cube_quads",
    "rhombus_quad",
    "cube_sphere_quads",
]


def icosahedron(radius: float = 0.5) -> TriMesh:
    """Regular icosahedron with circumscribed radius ``radius``."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    v *= radius / np.linalg.norm(v[0])
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return TriMesh(v, f)


def icosphere(subdivisions: int = 3, radius: float = 0.5) -> TriMesh:
    """Icosahedron subdivided ``subdivisions`` times, vertices projected to
    the sphere after every split. Face count is 20 * 4**subdivisions."""
    base = icosahedron(radius)
    v = list(base.vertices)
    f = base.faces
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = 0.5 * (v[a] + v[b])
                p = p * (radius / np.linalg.norm(p))
                cache[key] = len(v)
                v.append(p)
            return cache[key]

        out = []
        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            out += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.asarray(out, dtype=np.int64)
    return TriMesh(np.asarray(v), f)


def uv_sphere(n_lat: int = 22, n_lon: int = 24, radius: float = 0.5) -> TriMesh:
    """Latitude/longitude sphere with triangle fans at the poles.

    Face count is ``2 * n_lon * (n_lat - 1)``; the default lands at 1008.
    """
    if n_lat < 3 or n_lon < 3:
        raise ValueError("need n_lat >= 3 and n_lon >= 3")
    verts = [np.array([0.0, 0.0, radius])]
    for i in range(1, n_lat):
        phi = math.pi * i / n_lat
        for j in range(n_lon):
            th = 2 * math.pi * j / n_lon
            verts.append(
                radius
                * np.array(
                    [math.sin(phi) * math.cos(th), math.sin(phi) * math.sin(th), math.cos(phi)]
                )
            )
    verts.append(np.array([0.0, 0.0, -radius]))
    south = len(verts) - 1
    ring = lambda i, j: 1 + (i - 1) * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):
        faces.append([0, ring(1, j), ring(1, j + 1)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    for j in range(n_lon):
        faces.append([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def bumpy_sphere(
    subdivisions: int = 3,
    radius: float = 0.5,
    amplitude: float = 0.02,
    lobes: int = 6,
) -> TriMesh:
    """Sphere with a radial sinusoidal perturbation.

    Each vertex is displaced radially by
    ``amplitude * radius * sin(lobes * phi) * cos(lobes * theta)`` with
    (theta, phi) the longitude/colatitude of the vertex, producing a
    regular pattern of shallow bumps and dimples.
    """
    base = icosphere(subdivisions, radius)
    p = base.vertices
    r = np.linalg.norm(p, axis=1)
    theta = np.arctan2(p[:, 1], p[:, 0])
    phi = np.arccos(np.clip(p[:, 2] / r, -1.0, 1.0))
    bump = amplitude * radius * np.sin(lobes * phi) * np.cos(lobes * theta)
    v = p * ((r + bump) / r)[:, None]
    return TriMesh(v, base.faces.copy())


def torus(
    major_radius: float = 0.35,
    minor_radius: float = 0.15,
    n_major: int = 44,
    n_minor: int = 44,
) -> TriMesh:
    """Torus around the z-axis; face count is ``2 * n_major * n_minor``."""
    verts = np.empty((n_major * n_minor, 3))
    for i in range(n_major):
        u = 2 * math.pi * i / n_major
        for j in range(n_minor):
            v = 2 * math.pi * j / n_minor
            w = major_radius + minor_radius * math.cos(v)
            verts[i * n_minor + j] = (
                w * math.cos(u),
                w * math.sin(u),
                minor_radius * math.sin(v),
            )
    idx = lambda i, j: (i % n_major) * n_minor + (j % n_minor)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a, b = idx(i, j), idx(i + 1, j)
            c, d = idx(i + 1, j + 1), idx(i, j + 1)
            faces.append([a, b, c])
            faces.append([a, c, d])
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


def capped_cylinder(
    radius: float = 0.22,
    height: float = 1.0,
    n_segments: int = 36,
    n_rings: int = 14,
) -> TriMesh:
    """Closed cylinder along the z-axis with fan-triangulated caps."""
    verts = []
    for i in range(n_rings + 1):
        z = height * (i / n_rings - 0.5)
        for j in range(n_segments):
            th = 2 * math.pi * j / n_segments
            verts.append((radius * math.cos(th), radius * math.sin(th), z))
    top_c = len(verts)
    verts.append((0.0, 0.0, height / 2))
    bot_c = len(verts)
    verts.append((0.0, 0.0, -height / 2))

    ring = lambda i, j: i * n_segments + (j % n_segments)
    faces = []
    for i in range(n_rings):
        for j in range(n_segments):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append([a, b, d])
            faces.append([a, d, c])
    top = n_rings
    for j in range(n_segments):
        faces.append([top_c, ring(top, j), ring(top, j + 1)])
        faces.append([bot_c, ring(0, j + 1), ring(0, j)])
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def flat_grid(nx: int = 4, ny: int = 4, size: float = 1.0) -> TriMesh:
    """Planar grid in z = 0, each cell split along one diagonal, normals +z."""
    xs = np.linspace(-size / 2, size / 2, nx + 1)
    ys = np.linspace(-size / 2, size / 2, ny + 1)
    verts = np.array([(x, y, 0.0) for y in ys for x in xs])
    vid = lambda i, j: j * (nx + 1) + i
    faces = []
    for j in range(ny):
        for i in range(nx):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append([a, b, c])
            faces.append([a, c, d])
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


def genus2_surface(grid: int = 72, level: float = 0.02) -> TriMesh:
    """Genus-2 surface extracted from the implicit thickening of a planar
    figure-eight: ``(x^2 (1 - x^2) - y^2)^2 + z^2 / 2 = level``.

    The zero set of the inner expression is a figure-eight curve; offsetting
    it by ``level`` produces a smooth closed surface with two handles
    (Euler characteristic -2 for the default parameters, asserted in tests).
    """
    from skimage import measure  # deferred: only this shape needs it

    nx, ny, nz = grid, int(grid * 0.62), int(grid * 0.30)
    x = np.linspace(-1.25, 1.25, nx)
    y = np.linspace(-0.65, 0.65, ny)
    z = np.linspace(-0.35, 0.35, nz)
    gx, gy, gz = np.meshgrid(x, y, z, indexing="ij")
    vol = (gx**2 * (1.0 - gx**2) - gy**2) ** 2 + 0.5 * gz**2 - level
    spacing = (x[1] - x[0], y[1] - y[0], z[1] - z[0])
    verts, faces, _, _ = measure.marching_cubes(vol, level=0.0, spacing=spacing)
    verts = verts + np.array([x[0], y[0], z[0]])
    # marching_cubes orients triangles with outward normals along -gradient;
    # flip if the signed volume comes out negative
    mesh = TriMesh(verts.astype(np.float64), faces.astype(np.int64))
    vol6 = np.einsum(
        "ij,ij->i",
        mesh.corners[:, 0],
        np.cross(mesh.corners[:, 1], mesh.corners[:, 2]),
    ).sum()
    if vol6 < 0:
        mesh = TriMesh(mesh.vertices, mesh.faces[:, ::-1].copy())
    return mesh


# -- quad meshes (plain arrays) -----------------------------------------------


def quad_grid(nx: int = 4, ny: int = 4, size: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Planar quad grid in z = 0 covering a ``size`` x ``size`` square."""
    xs = np.linspace(-size / 2, size / 2, nx + 1)
    ys = np.linspace(-size / 2, size / 2, ny + 1)
    verts = np.array([(x, y, 0.0) for y in ys for x in xs])
    vid = lambda i, j: j * (nx + 1) + i
    faces = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(ny)
        for i in range(nx)
    ]
    return verts, np.asarray(faces, dtype=np.int64)


def cube_quads(size: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned cube, one quad per side, outward orientation."""
    s = size / 2
    verts = np.array(
        [
            [-s, -s, -s], [s, -s, -s], [s, s, -s], [-s, s, -s],
            [-s, -s, s], [s, -s, s], [s, s, s], [-s, s, s],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 3, 2, 1],  # bottom (-z)
            [4, 5, 6, 7],  # top (+z)
            [0, 1, 5, 4],  # front (-y)
            [2, 3, 7, 6],  # back (+y)
            [1, 2, 6, 5],  # right (+x)
            [3, 0, 4, 7],  # left (-x)
        ],
        dtype=np.int64,
    )
    return verts, faces


def rhombus_quad(angle_deg: float = 60.0, side: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Single planar rhombus with the given corner angle."""
    a = math.radians(angle_deg)
    e1 = np.array([side, 0.0, 0.0])
    e2 = np.array([side * math.cos(a), side * math.sin(a), 0.0])
    verts = np.stack([np.zeros(3), e1, e1 + e2, e2])
    return verts, np.array([[0, 1, 2, 3]], dtype=np.int64)


def cube_sphere_quads(n: int = 6, radius: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Quad sphere: a cube with ``n x n`` quads per side, vertices projected
    onto the sphere. The eight cube corners keep valence 3, every other
    vertex has valence 4."""
    grids = {}
    verts: list[np.ndarray] = []

    def vid(p: np.ndarray) -> int:
        key = tuple(np.round(p / np.linalg.norm(p) * radius, 12))
        if key not in grids:
            grids[key] = len(verts)
            verts.append(np.asarray(key))
        return grids[key]

    faces = []
    axes = [
        (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])),
        (np.array([-1.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, 1.0, 0])),
        (np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([1.0, 0, 0])),
        (np.array([0, -1.0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0])),
        (np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])),
        (np.array([0, 0, -1.0]), np.array([0, 1.0, 0]), np.array([1.0, 0, 0])),
    ]
    ts = np.linspace(-1.0, 1.0, n + 1)
    for normal, u, v in axes:
        for j in range(n):
            for i in range(n):
                c = [
                    normal + ts[i] * u + ts[j] * v,
                    normal + ts[i + 1] * u + ts[j] * v,
                    normal + ts[i + 1] * u + ts[j + 1] * v,
                    normal + ts[i] * u + ts[j + 1] * v,
                ]
                faces.append([vid(p) for p in c])
    V = np.asarray(verts)
    F = np.asarray(faces, dtype=np.int64)
    # fix winding so all quads face outward
    c0 = V[F[:, 0]]
    nrm = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 3]] - V[F[:, 0]])
    flip = np.einsum("ij,ij->i", nrm, c0) < 0
    F[flip] = F[flip][:, ::-1]
    return V, F
