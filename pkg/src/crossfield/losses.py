"""Loss terms coupling the distance field, the cross field, and the mesh.

Every term maps precomputed tensors to a differentiable scalar; the
caller evaluates the distance model once per point set and feeds the
shared value/gradient/Hessian tensors to each term. Six terms make up
the objective:

- ``eikonal``: unit-gradient defect ``|1 - ||grad f|||`` over surface
  and offset points.
- ``dirichlet``: ``|f|`` on surface points.
- ``dirichlet_far``: ``exp(-rho |f|)`` on box points, penalizing small
  values far from the surface.
- ``align_normal``: ``||H n||`` on surface points (the normal should be
  a zero-eigenvalue eigenvector of the Hessian).
- ``align_principal``: ``||(H a) x a|| + ||(H b) x b||`` on surface
  points, optionally weighted per point; zero when the cross spans
  Hessian eigenvectors.
- ``smoothness``: neighbor-transport agreement of the cross field over
  face adjacencies.

The weighted total applies an annealing factor ``tau`` to the normal
term only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor

from .mesh import TriMesh

__all__ = [
    "LOSS_TERMS",
    "LossWeights",
    "FeatureLines",
    "loss_eikonal",
    "loss_dirichlet",
    "loss_dirichlet_far",
    "loss_align_normal",
    "loss_align_principal",
    "loss_smoothness",
    "tau_schedule",
    "total_loss",
]

LOSS_TERMS = (
    "eikonal",
    "dirichlet",
    "dirichlet_far",
    "align_normal",
    "align_principal",
    "smoothness",
)


@dataclass(frozen=True)
class LossWeights:
    """Multipliers for the six loss terms plus the two decay rates.

    ``rho_far`` is the exponential rate inside the far-field term;
    ``rho_feature`` is the falloff rate of the feature-distance weight
    ``1 - exp(-rho_feature * d)``.
    """

    eikonal: float = 50.0
    dirichlet: float = 7000.0
    dirichlet_far: float = 600.0
    align_normal: float = 3.0
    align_principal: float = 10.0
    smoothness: float = 30.0
    rho_far: float = 100.0
    rho_feature: float = 10.0

    def __post_init__(self):
        for name in LOSS_TERMS:
            if getattr(self, name) < 0:
                raise ValueError(f"weight '{name}' must be >= 0")


def _safe_norm(v: Tensor, dim: int = -1) -> Tensor:
    """Euclidean norm with a zero subgradient at the exact zero vector.

    Plain ``norm`` has an undefined (NaN) gradient at 0; clamping the
    squared sum at the smallest positive normal number leaves values
    unchanged beyond ~1e-154 and zeroes the gradient at the origin.
    """
    sq = (v * v).sum(dim=dim)
    return torch.sqrt(torch.clamp(sq, min=torch.finfo(v.dtype).tiny))


def loss_eikonal(gradients: Tensor) -> Tensor:
    """Mean |1 - ||g||| over gradient rows (surface and offset points)."""
    return (1.0 - gradients.norm(dim=-1)).abs().mean()


def loss_dirichlet(values: Tensor) -> Tensor:
    """Mean |f| over surface points."""
    return values.abs().mean()


def loss_dirichlet_far(values: Tensor, rho: float = 100.0) -> Tensor:
    """Mean exp(-rho |f|) over box points."""
    return torch.exp(-rho * values.abs()).mean()


def loss_align_normal(hessians: Tensor, normals: Tensor) -> Tensor:
    """Mean ||H n|| over surface points.

    hessians: (n, 3, 3); normals: (n, 3).
    """
    hn = torch.einsum("nij,nj->ni", hessians, normals)
    return _safe_norm(hn).mean()


def loss_align_principal(
    hessians: Tensor,
    alpha: Tensor,
    beta: Tensor,
    weights: Tensor | None = None,
) -> Tensor:
    """Mean weighted ||(H a) x a|| + ||(H b) x b|| over surface points.

    Zero exactly when both cross directions are eigenvectors of the
    Hessian, i.e. the cross follows the principal directions. weights
    (n,) defaults to all ones.
    """
    ha = torch.einsum("nij,nj->ni", hessians, alpha)
    hb = torch.einsum("nij,nj->ni", hessians, beta)
    val = _safe_norm(torch.cross(ha, alpha, dim=-1)) + _safe_norm(
        torch.cross(hb, beta, dim=-1)
    )
    if weights is not None:
        val = val * weights
    return val.mean()


def loss_smoothness(
    alpha: Tensor,
    beta: Tensor,
    neighbors: Tensor,
    rotations: Tensor,
) -> Tensor:
    """Transport-agreement energy of the cross field over face adjacencies.

    For each face and each of its (up to three) neighbors, the
    neighbor's directions are rotated into the face's plane and the
    four absolute dot products against the face's own directions are
    summed; that sum is at least 2 for unit orthogonal pairs, with
    equality exactly at relative angles that are multiples of a quarter
    turn. The loss is the mean of (sum - 2) over all existing
    (face, neighbor) slots, so boundary faces average over the
    neighbors they have.

    alpha, beta: (m, 3); neighbors: (m, 3) integer, -1 marks a missing
    neighbor; rotations: (m, 3, 3, 3) neighbor-plane-to-face-plane
    rotation per slot.
    """
    valid = neighbors >= 0
    idx = neighbors.clamp(min=0)
    ra = torch.einsum("fsij,fsj->fsi", rotations, alpha[idx])
    rb = torch.einsum("fsij,fsj->fsi", rotations, beta[idx])
    ap = alpha[:, None, :]
    bp = beta[:, None, :]
    pair = (
        (ap * ra).sum(-1).abs()
        + (ap * rb).sum(-1).abs()
        + (bp * ra).sum(-1).abs()
        + (bp * rb).sum(-1).abs()
        - 2.0
    )
    pair = torch.where(valid, pair, pair.new_zeros(()))
    count = valid.sum()
    if count == 0:
        raise ValueError("mesh has no face adjacencies")
    return pair.sum() / count.to(pair.dtype)


def tau_schedule(
    iteration: int,
    total: int,
    plateau: float = 0.2,
    decay_end: float = 0.4,
    floor: float = 3e-4,
) -> float:
    """Annealing factor for the normal-alignment term.

    1 for the first ``plateau`` fraction of iterations, then linear
    decay to ``floor`` at the ``decay_end`` fraction, then 0 for the
    remainder.
    """
    if total < 1:
        raise ValueError("total iterations must be >= 1")
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    if not 0.0 <= plateau <= decay_end:
        raise ValueError("need 0 <= plateau <= decay_end")
    frac = iteration / total
    if frac < plateau:
        return 1.0
    if frac < decay_end:
        return 1.0 + (floor - 1.0) * (frac - plateau) / (decay_end - plateau)
    return 0.0


def total_loss(
    terms: dict[str, Tensor],
    weights: LossWeights | None = None,
    tau: float = 1.0,
) -> Tensor:
    """Weighted sum of the six terms, annealing the normal term by tau.

    Raises FloatingPointError naming the offending term if any value is
    non-finite, and ValueError if the term dict does not carry exactly
    the six expected keys or tau is outside [0, 1].
    """
    if weights is None:
        weights = LossWeights()
    if set(terms) != set(LOSS_TERMS):
        missing = set(LOSS_TERMS) - set(terms)
        extra = set(terms) - set(LOSS_TERMS)
        raise ValueError(f"bad term dict: missing {sorted(missing)}, extra {sorted(extra)}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    total = None
    for name in LOSS_TERMS:
        value = torch.as_tensor(terms[name])
        if not torch.isfinite(value):
            raise FloatingPointError(f"non-finite value in loss term '{name}'")
        scale = getattr(weights, name) * (tau if name == "align_normal" else 1.0)
        piece = scale * value
        total = piece if total is None else total + piece
    return total


class FeatureLines:
    """Sharp feature polylines given as chains of mesh vertex indices.

    Provides the per-face distance weight ``1 - exp(-rho * d)`` (zero on
    the lines, approaching one away from them) and hard direction
    assignments for faces containing a feature edge.
    """

    def __init__(self, polylines: list[list[int]]):
        chains = []
        for i, chain in enumerate(polylines):
            arr = np.asarray(chain, dtype=np.int64)
            if arr.ndim != 1 or arr.size < 2:
                raise ValueError(f"polyline {i} must be a chain of >= 2 vertex indices")
            if np.any(arr[:-1] == arr[1:]):
                raise ValueError(f"polyline {i} has a zero-length segment")
            chains.append(arr)
        if not chains:
            raise ValueError("need at least one polyline")
        self.polylines = chains

    @classmethod
    def from_json(cls, path: str) -> "FeatureLines":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or "polylines" not in data:
            raise ValueError(f"{path}: expected an object with a 'polylines' key")
        return cls(data["polylines"])

    def _check_indices(self, mesh: TriMesh) -> None:
        n = mesh.vertices.shape[0]
        for i, chain in enumerate(self.polylines):
            if chain.min() < 0 or chain.max() >= n:
                raise ValueError(f"polyline {i}: vertex index out of range (0..{n - 1})")

    def segments(self, mesh: TriMesh) -> np.ndarray:
        """All polyline segments as an (s, 2, 3) coordinate array."""
        self._check_indices(mesh)
        segs = []
        for chain in self.polylines:
            a = mesh.vertices[chain[:-1]]
            b = mesh.vertices[chain[1:]]
            segs.append(np.stack([a, b], axis=1))
        return np.concatenate(segs, axis=0)

    def face_weights(self, mesh: TriMesh, rho: float = 10.0) -> np.ndarray:
        """Per-face weight 1 - exp(-rho * d(centroid, nearest line point))."""
        segs = self.segments(mesh)
        c = mesh.face_centroids
        a = segs[:, 0]
        ab = segs[:, 1] - segs[:, 0]
        denom = (ab * ab).sum(axis=1)
        denom = np.where(denom > 0, denom, 1.0)
        # clamped projection of every centroid onto every segment
        t = np.einsum("fj,sj->fs", c, ab) - (a * ab).sum(axis=1)[None, :]
        t = np.clip(t / denom[None, :], 0.0, 1.0)
        closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        dist = np.linalg.norm(c[:, None, :] - closest, axis=2).min(axis=1)
        return 1.0 - np.exp(-rho * dist)

    def face_directions(self, mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
        """Hard frame angles for faces that contain a feature edge.

        Returns (face_indices, theta) where theta aligns the first
        cross direction with the feature tangent expressed in the
        face's frame. When several feature edges touch one face, the
        first in polyline order wins.
        """
        self._check_indices(mesh)
        edge_faces: dict[tuple[int, int], list[int]] = {}
        for f, tri in enumerate(mesh.faces):
            for j in range(3):
                key = tuple(sorted((int(tri[j]), int(tri[(j + 1) % 3]))))
                edge_faces.setdefault(key, []).append(f)
        mu, nu = mesh.face_frames
        assigned: dict[int, float] = {}
        for chain in self.polylines:
            for i, j in zip(chain[:-1], chain[1:]):
                key = tuple(sorted((int(i), int(j))))
                tangent = mesh.vertices[j] - mesh.vertices[i]
                for f in edge_faces.get(key, ()):
                    if f in assigned:
                        continue
                    assigned[f] = float(
                        np.arctan2(tangent @ nu[f], tangent @ mu[f])
                    )
        faces = np.array(sorted(assigned), dtype=np.int64)
        theta = np.array([assigned[f] for f in faces], dtype=np.float64)
        return faces, theta
