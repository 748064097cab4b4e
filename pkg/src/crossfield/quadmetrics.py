"""Quality metrics for quad meshes produced by external remeshers.

Five numbers summarize a quad mesh against the triangle mesh it was
derived from: the population standard deviation of quad areas (x10000),
the RMS deviation of corner angles from 90 degrees (in degrees), the
count of irregular vertices, the symmetric chamfer distance to the
reference surface (x10000, mean Euclidean nearest-neighbor distance
over area-uniform samples), and the mean per-quad Jacobian ratio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh, _parse_face_vertex

__all__ = [
    "QuadMesh",
    "MetricsReport",
    "load_quad_obj",
    "write_quad_obj",
    "area_distortion",
    "angle_distortion",
    "jacobian_ratio",
    "chamfer",
    "count_irregular",
    "evaluate_quad",
]


class QuadMesh:
    """Pure quad mesh: (n, 3) float vertices and (m, 4) int quads."""

    def __init__(self, vertices: np.ndarray, quads: np.ndarray):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.quads = np.ascontiguousarray(quads, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError(f"vertices must be (n, 3), got {self.vertices.shape}")
        if self.quads.ndim != 2 or self.quads.shape[1] != 4:
            raise ValueError(f"quads must be (m, 4), got {self.quads.shape}")
        if len(self.quads) == 0:
            raise ValueError("mesh has no quads")
        if self.quads.min(initial=0) < 0 or self.quads.max(initial=-1) >= len(self.vertices):
            raise ValueError("quad references a vertex out of range")
        for k in range(len(self.quads)):
            if len(set(self.quads[k])) != 4:
                raise ValueError(f"quad {k} repeats a vertex: {self.quads[k].tolist()}")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_quads(self) -> int:
        return len(self.quads)

    def corners(self) -> np.ndarray:
        """(m, 4, 3) corner positions."""
        return self.vertices[self.quads]

    def edge_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges (e, 2) and their quad counts (e,)."""
        q = self.quads
        e = np.concatenate([q[:, [0, 1]], q[:, [1, 2]], q[:, [2, 3]], q[:, [3, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0, return_counts=True)

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"QuadMesh({self.n_vertices} vertices, {self.n_quads} quads)"


def load_quad_obj(path: str | Path) -> QuadMesh:
    """Read a quad mesh from an OBJ file (4-vertex ``f`` records only)."""
    path = Path(path)
    vertices: list[list[float]] = []
    quads: list[list[int]] = []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            kind = parts[0]
            if kind == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{ln}: vertex needs 3 coordinates")
                vertices.append([float(p) for p in parts[1:4]])
            elif kind == "f":
                if len(parts) != 5:
                    raise ValueError(
                        f"{path}:{ln}: expected a 4-vertex face, got {len(parts) - 1} vertices"
                    )
                idx = [_parse_face_vertex(p) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                quads.append(idx)
    if not vertices:
        raise ValueError(f"{path}: no vertices found")
    if not quads:
        raise ValueError(f"{path}: no quad faces found")
    v = np.asarray(vertices)
    q = np.asarray(quads, dtype=np.int64)
    if q.min() < 0 or q.max() >= len(v):
        raise ValueError(f"{path}: face references a vertex out of range")
    return QuadMesh(v, q)


def write_quad_obj(path: str | Path, mesh: QuadMesh) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for q in mesh.quads:
            fh.write(f"f {q[0] + 1} {q[1] + 1} {q[2] + 1} {q[3] + 1}\n")


# --- individual metrics -------------------------------------------------------


def _quad_areas(mesh: QuadMesh) -> np.ndarray:
    c = mesh.corners()
    t1 = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
    t2 = 0.5 * np.linalg.norm(np.cross(c[:, 2] - c[:, 0], c[:, 3] - c[:, 0]), axis=1)
    return t1 + t2


def area_distortion(mesh: QuadMesh) -> float:
    """Population standard deviation of quad areas, x10000."""
    return float(np.std(_quad_areas(mesh)) * 1e4)


def angle_distortion(mesh: QuadMesh) -> float:
    """RMS deviation of the 4m corner angles from a right angle, degrees."""
    c = mesh.corners()
    dev2 = np.zeros((mesh.n_quads, 4))
    for k in range(4):
        u = c[:, (k + 1) % 4] - c[:, k]
        w = c[:, (k - 1) % 4] - c[:, k]
        lu = np.linalg.norm(u, axis=1)
        lw = np.linalg.norm(w, axis=1)
        bad = (lu < 1e-300) | (lw < 1e-300)
        if bad.any():
            raise ValueError(
                f"quad {int(np.nonzero(bad)[0][0])} has a zero-length edge at corner {k}"
            )
        ang = np.arctan2(np.linalg.norm(np.cross(u, w), axis=1),
                         np.einsum("ij,ij->i", u, w))
        dev2[:, k] = (ang - 0.5 * np.pi) ** 2
    return float(np.degrees(np.sqrt(dev2.mean())))


def _newell_normals(c: np.ndarray) -> np.ndarray:
    """Best-fit plane normal per quad from (m, 4, 3) corners (Newell)."""
    n = np.zeros((len(c), 3))
    for k in range(4):
        a = c[:, k]
        b = c[:, (k + 1) % 4]
        n[:, 0] += (a[:, 1] - b[:, 1]) * (a[:, 2] + b[:, 2])
        n[:, 1] += (a[:, 2] - b[:, 2]) * (a[:, 0] + b[:, 0])
        n[:, 2] += (a[:, 0] - b[:, 0]) * (a[:, 1] + b[:, 1])
    return n


def jacobian_ratio(mesh: QuadMesh) -> float:
    """Mean over quads of min/max signed corner Jacobian determinant.

    Corner determinants are signed by the quad's best-fit plane normal;
    a quad whose worst corner is degenerate or inverted scores 0, a
    parallelogram scores 1.
    """
    c = mesh.corners()
    n = _newell_normals(c)
    lens = np.linalg.norm(n, axis=1)
    flat = lens < 1e-300
    n[flat] = (0.0, 0.0, 1.0)  # fully degenerate quads score 0 below
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    det = np.zeros((mesh.n_quads, 4))
    for k in range(4):
        e1 = c[:, (k + 1) % 4] - c[:, k]
        e2 = c[:, (k - 1) % 4] - c[:, k]
        det[:, k] = np.einsum("ij,ij->i", np.cross(e1, e2), n)
    lo = det.min(axis=1)
    hi = det.max(axis=1)
    ratio = np.zeros(mesh.n_quads)
    ok = (hi > 0) & ~flat
    ratio[ok] = np.clip(lo[ok] / hi[ok], 0.0, 1.0)
    return float(ratio.mean())


def _sample_triangles(vertices, faces, n, rng) -> np.ndarray:
    """n area-uniform samples from a triangle soup."""
    c = vertices[faces]
    areas = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
    total = areas.sum()
    if total <= 0:
        raise ValueError("surface has zero area")
    pick = rng.choice(len(faces), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1
    u[flip] = 1 - u[flip]
    v[flip] = 1 - v[flip]
    base = c[pick]
    return base[:, 0] + u[:, None] * (base[:, 1] - base[:, 0]) + v[:, None] * (
        base[:, 2] - base[:, 0]
    )


def _as_triangles(surface) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and triangle indices of a triangle or quad surface."""
    quads = getattr(surface, "quads", None)
    if quads is not None:
        tris = np.concatenate([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]])
        return surface.vertices, tris
    faces = getattr(surface, "faces", None)
    if faces is not None:
        return surface.vertices, faces
    raise TypeError(
        f"expected a triangle or quad mesh, got {type(surface).__name__}"
    )


def chamfer(
    mesh: QuadMesh, reference: TriMesh, n_samples: int = 100_000, seed: int = 0
) -> float:
    """Symmetric chamfer distance between surfaces, x10000.

    Draws n_samples area-uniform points from each surface (quads split
    into two triangles) and averages the two directed mean
    nearest-neighbor Euclidean distances. The reference may be a
    triangle or quad mesh. Seeded and reproducible.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    a = _sample_triangles(*_as_triangles(mesh), n_samples, rng)
    b = _sample_triangles(*_as_triangles(reference), n_samples, rng)
    d_ab = cKDTree(b).query(a)[0]
    d_ba = cKDTree(a).query(b)[0]
    return float(0.5 * (d_ab.mean() + d_ba.mean()) * 1e4)


def count_irregular(mesh: QuadMesh) -> int:
    """Number of irregular vertices.

    Interior vertices are regular at valence 4. Boundary vertices are
    regular at valence 3, and also at valence 2 (a domain corner with a
    single incident quad); anything else counts. Referenced vertices
    only; raises on a non-manifold edge.
    """
    edges, counts = mesh.edge_counts()
    if (counts > 2).any():
        e = edges[np.argmax(counts > 2)]
        raise ValueError(
            f"non-manifold edge ({e[0]}, {e[1]}) shared by {counts.max()} quads"
        )
    valence = np.zeros(mesh.n_vertices, dtype=np.int64)
    np.add.at(valence, edges[:, 0], 1)
    np.add.at(valence, edges[:, 1], 1)
    boundary = np.zeros(mesh.n_vertices, dtype=bool)
    rim = edges[counts == 1]
    boundary[rim.ravel()] = True
    referenced = valence > 0
    interior_bad = referenced & ~boundary & (valence != 4)
    boundary_bad = boundary & (valence != 3) & (valence != 2)
    return int(interior_bad.sum() + boundary_bad.sum())


# --- bundled report -----------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    """The five quad-quality numbers for one mesh."""

    area: float
    angle: float
    sings: int
    cd: float
    jr: float

    def to_json_dict(self) -> dict:
        return {
            "area": self.area,
            "angle": self.angle,
            "sings": self.sings,
            "cd": self.cd,
            "jr": self.jr,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def evaluate_quad(
    mesh: QuadMesh, reference: TriMesh, n_samples: int = 100_000, seed: int = 0
) -> MetricsReport:
    """Compute all five metrics of a quad mesh against its reference."""
    return MetricsReport(
        area=area_distortion(mesh),
        angle=angle_distortion(mesh),
        sings=count_irregular(mesh),
        cd=chamfer(mesh, reference, n_samples=n_samples, seed=seed),
        jr=jacobian_ratio(mesh),
    )
