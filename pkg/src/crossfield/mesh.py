"""Triangle mesh container with the connectivity and per-face data needed
for cross-field optimization.

The central class is :class:`TriMesh`, which wraps vertex / face arrays and
lazily derives face frames, adjacency and the per-edge tangent-plane
rotations used to compare directions across neighboring faces.
"""

from __future__ import annotations

import math
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = ["TriMesh", "load_obj", "write_obj"]


def _parse_face_vertex(token: str) -> int:
    # accepts "i", "i/j", "i//k", "i/j/k"; only the vertex index matters here
    head = token.split("/", 1)[0]
    return int(head)


def load_obj(path: str | Path) -> "TriMesh":
    """Load an ASCII OBJ file as a :class:`TriMesh`.

    Only ``v`` and ``f`` records are interpreted; other line types
    (normals, texture coordinates, groups, materials, comments) are
    skipped. Face indices are 1-based per the OBJ convention.

    Parameters
    ----------
    path : str or Path
        File to read.

    Returns
    -------
    TriMesh

    Raises
    ------
    ValueError
        If a face is not a triangle, an index is out of range, or the
        resulting mesh fails validation (see :class:`TriMesh`).
    """
    verts: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            key = parts[0]
            if key == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: malformed vertex line: {line!r}")
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif key == "f":
                idx = [_parse_face_vertex(t) for t in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(
                        f"{path}:{lineno}: face has {len(idx)} vertices; only triangles are supported"
                    )
                faces.append((idx[0], idx[1], idx[2]))
            # silently ignore vn/vt/o/g/s/usemtl/mtllib and friends
    if not verts:
        raise ValueError(f"{path}: no vertices found")
    if not faces:
        raise ValueError(f"{path}: no faces found")
    v = np.asarray(verts, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if f.min() < 1 or f.max() > len(v):
        raise ValueError(f"{path}: face index out of range (1..{len(v)})")
    return TriMesh(v, f - 1)


def write_obj(path: str | Path, vertices: np.ndarray, faces: np.ndarray) -> None:
    """Write vertices and (0-based) faces as an ASCII OBJ file.

    Works for triangle and quad faces alike; indices are converted to the
    1-based OBJ convention.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        for p in vertices:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for f in faces:
            fh.write("f " + " ".join(str(int(i) + 1) for i in f) + "\n")


class TriMesh:
    """An oriented triangle mesh.

    Validation at construction rejects the inputs the rest of the pipeline
    cannot express: non-triangular faces, degenerate faces (repeated
    vertex), and non-manifold edges (an edge shared by more than two
    faces). Open boundaries are allowed.

    Parameters
    ----------
    vertices : (n, 3) float array
    faces : (m, 3) int array
        0-based vertex indices, counterclockwise when seen from outside.
    """

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        v = np.asarray(vertices, dtype=np.float64)
        f = np.asarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must be (m, 3) triangles, got {f.shape}")
        if not np.isfinite(v).all():
            raise ValueError("vertices contain NaN/Inf")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        if ((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])).any():
            raise ValueError("degenerate face (repeated vertex index)")
        self.vertices = v
        self.faces = f
        self._check_edge_manifold()

    # -- construction helpers -------------------------------------------------

    def _check_edge_manifold(self) -> None:
        e = self._directed_edges()
        und = np.sort(e, axis=1)
        _, counts = np.unique(und, axis=0, return_counts=True)
        if counts.size and counts.max() > 2:
            raise ValueError(
                f"non-manifold edge: {int((counts > 2).sum())} edge(s) shared by more than two faces"
            )

    def _directed_edges(self) -> np.ndarray:
        """(3m, 2) directed edges; face i contributes rows 3i..3i+2 in slot
        order (v0,v1), (v1,v2), (v2,v0)."""
        f = self.faces
        return np.stack(
            [f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=1
        ).reshape(-1, 2)

    # -- basic quantities ------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def edges(self) -> np.ndarray:
        """(e, 2) unique undirected edges, each row sorted ascending."""
        und = np.sort(self._directed_edges(), axis=1)
        return np.unique(und, axis=0)

    @cached_property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_faces

    @cached_property
    def corners(self) -> np.ndarray:
        """(m, 3, 3) vertex positions per face corner."""
        return self.vertices[self.faces]

    @cached_property
    def face_normals(self) -> np.ndarray:
        """(m, 3) unit face normals (right-hand rule over vertex order)."""
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        lens = np.linalg.norm(n, axis=1, keepdims=True)
        if (lens < 1e-300).any():
            raise ValueError("zero-area face")
        return n / lens

    @cached_property
    def face_areas(self) -> np.ndarray:
        c = self.corners
        return 0.5 * np.linalg.norm(
            np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1
        )

    @cached_property
    def face_centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def face_frames(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal tangent bases per face.

        Returns
        -------
        (mu, nu) : pair of (m, 3) arrays
            ``mu`` is the normalized first edge (v1 - v0), ``nu = n x mu``,
            so that ``mu x nu = n``.
        """
        c = self.corners
        mu = c[:, 1] - c[:, 0]
        mu = mu / np.linalg.norm(mu, axis=1, keepdims=True)
        nu = np.cross(self.face_normals, mu)
        nu = nu / np.linalg.norm(nu, axis=1, keepdims=True)
        return mu, nu

    # -- adjacency -------------------------------------------------------------

    @cached_property
    def face_neighbors(self) -> np.ndarray:
        """(m, 3) neighbor face index across edge slot j (slot j is the edge
        from corner j to corner j+1); -1 where the edge is on the boundary."""
        e = self._directed_edges()  # row 3i+j belongs to face i, slot j
        key_fwd = e[:, 0] * self.n_vertices + e[:, 1]
        key_rev = e[:, 1] * self.n_vertices + e[:, 0]
        order = np.argsort(key_fwd, kind="stable")
        sorted_keys = key_fwd[order]
        pos = np.searchsorted(sorted_keys, key_rev)
        nbr = np.full(len(e), -1, dtype=np.int64)
        ok = (pos < len(e)) & (sorted_keys[np.minimum(pos, len(e) - 1)] == key_rev)
        nbr[ok] = order[pos[ok]] // 3
        return nbr.reshape(-1, 3)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """(b, 2) undirected boundary edges (those with a single incident face)."""
        und = np.sort(self._directed_edges(), axis=1)
        uniq, counts = np.unique(und, axis=0, return_counts=True)
        return uniq[counts == 1]

    @cached_property
    def is_closed(self) -> bool:
        return len(self.boundary_edges) == 0

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Sorted array of vertex indices lying on at least one boundary edge."""
        return np.unique(self.boundary_edges)

    @cached_property
    def vertex_faces(self) -> list[np.ndarray]:
        """Per-vertex array of incident face indices (unordered)."""
        out: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for fi, tri in enumerate(self.faces):
            for vi in tri:
                out[vi].append(fi)
        return [np.asarray(a, dtype=np.int64) for a in out]

    def one_ring_faces(self, vertex: int) -> np.ndarray:
        """Faces around an interior vertex, ordered counterclockwise.

        The walk starts at an arbitrary incident face and repeatedly crosses
        the outgoing edge so that consecutive faces share an edge containing
        ``vertex``; for a consistently oriented mesh this traverses the ring
        counterclockwise around the vertex normal.

        Raises
        ------
        ValueError
            If ``vertex`` lies on the boundary (the ring is not a cycle)
            or the ring cannot be closed.
        """
        incident = self.vertex_faces[vertex]
        if len(incident) == 0:
            raise ValueError(f"vertex {vertex} has no incident faces")
        start = int(incident[0])
        ring = [start]
        cur = start
        while True:
            tri = self.faces[cur]
            j = int(np.where(tri == vertex)[0][0])
            # corner order (vertex, a, b): leaving across edge (b, vertex),
            # which is slot (j+2) % 3, continues the CCW sweep
            nxt = int(self.face_neighbors[cur, (j + 2) % 3])
            if nxt == -1:
                raise ValueError(f"vertex {vertex} is on the boundary")
            if nxt == start:
                break
            ring.append(nxt)
            cur = nxt
            if len(ring) > len(incident):
                raise ValueError(f"one-ring walk around vertex {vertex} did not close")
        if len(ring) != len(incident):
            raise ValueError(f"vertex {vertex} has a non-disk neighborhood")
        return np.asarray(ring, dtype=np.int64)

    # -- geometry operations ---------------------------------------------------

    def normalized(self) -> "TriMesh":
        """Center the bounding box at the origin and scale uniformly so the
        longest axis spans exactly [-0.5, 0.5].

        Returns a new mesh; the receiver is unchanged.
        """
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        center = 0.5 * (lo + hi)
        extent = float((hi - lo).max())
        if extent <= 0:
            raise ValueError("mesh has zero extent")
        v = (self.vertices - center) / extent
        return TriMesh(v, self.faces.copy())

    @cached_property
    def edge_rotations(self) -> np.ndarray:
        """(m, 3, 3, 3) rotation matrices aligned with ``face_neighbors``.

        ``edge_rotations[i, j]`` rotates about the shared edge by the
        dihedral angle, carrying the tangent plane of neighbor
        ``face_neighbors[i, j]`` onto the plane of face ``i``; it maps the
        neighbor's normal exactly onto this face's normal and keeps the
        shared edge direction fixed. Identity where there is no neighbor.
        """
        m = self.n_faces
        rot = np.tile(np.eye(3), (m, 3, 1, 1))
        normals = self.face_normals
        f = self.faces
        for j in range(3):
            nbr = self.face_neighbors[:, j]
            has = nbr >= 0
            if not has.any():
                continue
            i = np.nonzero(has)[0]
            q = nbr[i]
            a = self.vertices[f[i, j]]
            b = self.vertices[f[i, (j + 1) % 3]]
            axis = b - a
            axis = axis / np.linalg.norm(axis, axis=1, keepdims=True)
            n_f = normals[i]
            n_q = normals[q]
            cos = np.einsum("ij,ij->i", n_q, n_f)
            sin = np.einsum("ij,ij->i", np.cross(n_q, n_f), axis)
            rot[i, j] = _axis_angle_matrices(axis, cos, sin)
        return rot

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        kind = "closed" if self.is_closed else f"{len(self.boundary_edges)} boundary edges"
        return f"TriMesh({self.n_vertices} vertices, {self.n_faces} faces, {kind})"


def _axis_angle_matrices(axis: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    """Rodrigues rotation matrices for batched unit axes and angle (cos, sin)."""
    n = len(axis)
    x, y, z = axis[:, 0], axis[:, 1], axis[:, 2]
    k = np.zeros((n, 3, 3))
    k[:, 0, 1], k[:, 0, 2] = -z, y
    k[:, 1, 0], k[:, 1, 2] = z, -x
    k[:, 2, 0], k[:, 2, 1] = -y, x
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))
    outer = axis[:, :, None] * axis[:, None, :]
    return (
        cos[:, None, None] * eye
        + sin[:, None, None] * k
        + (1.0 - cos)[:, None, None] * outer
    )
