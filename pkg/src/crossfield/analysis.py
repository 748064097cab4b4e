"""Cross-field analysis: extraction from a trained model, singularity
indices, alignment statistics against analytic principal directions, and
a plain-text exporter for downstream quadrangulation tools.

Singularity indices follow the discrete Poincare-Hopf convention for
fields with quarter-turn symmetry: around each interior vertex, the
field's rotation relative to parallel transport plus the vertex angle
defect is an exact multiple of pi/2, and dividing by 2*pi gives an index
that is a multiple of 1/4. Indices are only meaningful where the field
varies slowly relative to the mesh (steps under pi/4 per ring edge);
a coarser mesh aliases, as any discrete matching does.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .anglenet import cross_from_theta, face_features, predict_theta
from .mesh import TriMesh

__all__ = [
    "CrossField",
    "SingularityReport",
    "AlignmentStats",
    "extract_field",
    "singularities",
    "alignment_error",
    "export_field",
    "load_field",
]

_HALF_PI = 0.5 * np.pi


def _wrap_quarter(x: np.ndarray) -> np.ndarray:
    """Reduce angles to [-pi/4, pi/4] (nearest cross branch).

    A mismatch within ~1e-9 of the pi/4 boundary keeps its sign rather
    than wrapping, making the reduction an odd function of the mismatch
    even there: when two crosses sit an exact quarter turn apart, the
    two crossing directions pick opposite signs and cancel instead of
    minting spurious index around perfectly regular vertices (a
    constant-angle field on a uniform grid hits this exactly, give or
    take one float ulp).
    """
    r = x / _HALF_PI
    k = np.sign(r) * np.floor(np.abs(r) + (0.5 - 1e-9))
    return x - _HALF_PI * k


@dataclass(frozen=True)
class CrossField:
    """Per-face cross: frame angle theta and world-space axes.

    alpha and beta are unit vectors in the face plane with
    beta = n x alpha; together with their negations they form the four
    branches of the cross.
    """

    theta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=np.float64)
        a = np.asarray(self.alpha, dtype=np.float64)
        b = np.asarray(self.beta, dtype=np.float64)
        if t.ndim != 1 or a.shape != (len(t), 3) or b.shape != (len(t), 3):
            raise ValueError(
                f"inconsistent field shapes: theta {t.shape}, "
                f"alpha {a.shape}, beta {b.shape}"
            )
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def __len__(self) -> int:
        return len(self.theta)


@dataclass(frozen=True)
class SingularityReport:
    """Per-vertex singularity indices of a cross field.

    index holds one entry per vertex, a multiple of 1/4 (0 for regular
    vertices). Boundary vertices have no well-defined index; their
    entries are 0 and their ids are listed separately.
    """

    index: np.ndarray
    boundary_vertices: np.ndarray
    total_index: float
    euler_characteristic: int

    def singular_vertices(self) -> np.ndarray:
        """Vertex ids with nonzero index, ascending."""
        return np.nonzero(self.index)[0].astype(np.int64)


@dataclass(frozen=True)
class AlignmentStats:
    """Angles (radians) between a cross field and reference directions.

    per_face holds the per-face angle in [0, pi/4], NaN where the
    reference is undefined; the summary statistics cover valid faces.
    """

    per_face: np.ndarray
    median: float
    mean: float
    max: float
    n_valid: int
    n_excluded: int


def extract_field(angle_model, mesh: TriMesh) -> CrossField:
    """Evaluate the trained angle model into a per-face cross field."""
    feats = face_features(mesh)
    with torch.no_grad():
        theta = predict_theta(angle_model, feats).to(torch.float64).numpy()
    mu, nu = mesh.face_frames
    alpha, beta = cross_from_theta(theta, mu, nu)
    return CrossField(theta=theta, alpha=alpha, beta=beta)


def _as_theta(field, n_faces: int) -> np.ndarray:
    theta = np.asarray(getattr(field, "theta", field), dtype=np.float64)
    if theta.shape != (n_faces,):
        raise ValueError(
            f"field has {theta.shape} angles for a mesh with {n_faces} faces"
        )
    return theta


def _branch_deltas(mesh: TriMesh, theta: np.ndarray) -> np.ndarray:
    """(m, 3) branch-matched field rotation across each face edge slot.

    Entry [f, j] is the angle of neighbor face g's cross relative to
    f's, after carrying g's tangent plane onto f's and reducing to the
    nearest quarter turn; 0 where the slot has no neighbor.
    """
    mu, nu = mesh.face_frames
    neighbors = mesh.face_neighbors
    rot = mesh.edge_rotations
    delta = np.zeros((mesh.n_faces, 3))
    for j in range(3):
        has = neighbors[:, j] >= 0
        if not has.any():
            continue
        i = np.nonzero(has)[0]
        q = neighbors[i, j]
        t = np.einsum("fij,fj->fi", rot[i, j], mu[q])
        rho = np.arctan2(
            np.einsum("ij,ij->i", t, nu[i]), np.einsum("ij,ij->i", t, mu[i])
        )
        delta[i, j] = _wrap_quarter(theta[q] + rho - theta[i])
    return delta


def _angle_defects(mesh: TriMesh) -> np.ndarray:
    """(v,) angle defect 2*pi - (sum of incident corner angles)."""
    c = mesh.corners
    total = np.zeros(mesh.n_vertices)
    for j in range(3):
        u = c[:, (j + 1) % 3] - c[:, j]
        w = c[:, (j + 2) % 3] - c[:, j]
        ang = np.arctan2(np.linalg.norm(np.cross(u, w), axis=1),
                         np.einsum("ij,ij->i", u, w))
        np.add.at(total, mesh.faces[:, j], ang)
    return 2.0 * np.pi - total


def singularities(field, mesh: TriMesh, tol: float = 1e-6) -> SingularityReport:
    """Locate cross-field singularities by their Poincare-Hopf index.

    For each interior vertex the one-ring is walked counterclockwise,
    accumulating the branch-matched field rotation between consecutive
    faces; adding the angle defect and dividing by 2*pi gives the index,
    which is a multiple of 1/4 up to rounding error. field may be a
    CrossField or a raw (m,) array of frame angles.

    Raises
    ------
    ValueError
        If the field size does not match the mesh, a vertex has a
        non-disk neighborhood, or a raw index is further than tol from
        a multiple of 1/4 (which indicates a bug, not a bad field).
    """
    theta = _as_theta(field, mesh.n_faces)
    delta = _branch_deltas(mesh, theta)
    defect = _angle_defects(mesh)
    faces = mesh.faces

    index = np.zeros(mesh.n_vertices)
    boundary = set(int(b) for b in mesh.boundary_vertices)
    for v in range(mesh.n_vertices):
        if v in boundary:
            continue
        ring = mesh.one_ring_faces(v)
        s = 0.0
        for f in ring:
            pos = int(np.nonzero(faces[f] == v)[0][0])
            s += delta[f, (pos + 2) % 3]
        raw = (defect[v] + s) / (2.0 * np.pi)
        quarters = round(raw * 4.0)
        if abs(raw - quarters / 4.0) > tol:
            raise ValueError(
                f"vertex {v}: raw index {raw:.9f} is not a multiple of 1/4"
            )
        index[v] = quarters / 4.0

    return SingularityReport(
        index=index,
        boundary_vertices=mesh.boundary_vertices.copy(),
        total_index=float(index.sum()),
        euler_characteristic=mesh.euler_characteristic,
    )


def alignment_error(field, mesh: TriMesh, oracle) -> AlignmentStats:
    """Angle statistics between a cross field and oracle directions.

    oracle is a callable mesh -> (directions, valid) giving a reference
    direction per face centroid and a mask of faces where it is defined
    (see crossfield.analytic). Each reference direction is projected
    into its face plane and compared against the nearest of the four
    cross branches, so every angle lands in [0, pi/4]. Faces where the
    oracle is undefined, or where the projection vanishes, are excluded
    and counted.
    """
    theta = _as_theta(field, mesh.n_faces)
    d, valid = oracle(mesh)
    d = np.asarray(d, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool).copy()
    if d.shape != (mesh.n_faces, 3) or valid.shape != (mesh.n_faces,):
        raise ValueError("oracle output does not match the mesh")

    n = mesh.face_normals
    mu, nu = mesh.face_frames
    d_t = d - np.einsum("ij,ij->i", d, n)[:, None] * n
    lens = np.linalg.norm(d_t, axis=1)
    valid &= lens > 1e-9
    if not valid.any():
        raise ValueError("oracle defines no valid faces on this mesh")

    ref = np.arctan2(
        np.einsum("ij,ij->i", d_t, nu), np.einsum("ij,ij->i", d_t, mu)
    )
    err = np.abs(_wrap_quarter(ref - theta))
    per_face = np.where(valid, err, np.nan)
    ok = err[valid]
    return AlignmentStats(
        per_face=per_face,
        median=float(np.median(ok)),
        mean=float(ok.mean()),
        max=float(ok.max()),
        n_valid=int(valid.sum()),
        n_excluded=int((~valid).sum()),
    )


def export_field(field: CrossField, mesh: TriMesh, path: str | Path) -> None:
    """Write a cross field as text: ``ROSY 4 <faces>`` then one line per
    face holding alpha and beta (six numbers, 9 significant digits),
    in the mesh's face order."""
    if len(field) != mesh.n_faces:
        raise ValueError(
            f"field has {len(field)} faces but the mesh has {mesh.n_faces}"
        )
    with open(path, "w") as fh:
        fh.write(f"ROSY 4 {mesh.n_faces}\n")
        for a, b in zip(field.alpha, field.beta):
            fh.write(
                f"{a[0]:.9g} {a[1]:.9g} {a[2]:.9g} "
                f"{b[0]:.9g} {b[1]:.9g} {b[2]:.9g}\n"
            )


def load_field(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a field written by export_field; returns (alpha, beta)."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "ROSY" or header[1] != "4":
            raise ValueError(f"{path}:1: expected header 'ROSY 4 <faces>'")
        try:
            count = int(header[2])
        except ValueError:
            raise ValueError(f"{path}:1: face count {header[2]!r} is not an integer") from None
        rows = np.zeros((count, 6))
        for k in range(count):
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: expected {count} rows, found {k}")
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"{path}:{k + 2}: expected 6 numbers, got {len(parts)}")
            rows[k] = [float(p) for p in parts]
    return rows[:, :3].copy(), rows[:, 3:].copy()
