"""Sample sets for fitting: surface points, near-surface offsets, box points.

Three point sets drive the optimization. ``P`` consists of one sample
per face (centroid plus the face normal and tangent frame). ``Omega``
perturbs each surface point by an isotropic Gaussian whose standard
deviation adapts to the local sampling density (distance to the k-th
nearest neighboring centroid). ``Q`` fills the normalized bounding box
``[-0.5, 0.5]^3`` uniformly. Offset and box points are cheap to draw,
so callers typically resample them every iteration with a fresh
iteration-derived seed while the surface set stays fixed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh

__all__ = [
    "SurfaceSamples",
    "SampleSet",
    "build_P",
    "knn_sigma",
    "build_Omega",
    "build_Q",
    "build_sample_set",
]


@dataclass(frozen=True)
class SurfaceSamples:
    """Per-face surface samples.

    Attributes
    ----------
    points : (n, 3) float array
        Face centroids.
    normals : (n, 3) float array
        Unit face normals.
    mu, nu : (n, 3) float arrays
        The in-plane tangent frame at each sample; ``(mu, nu, normal)``
        is right-handed and orthonormal.
    """

    points: np.ndarray
    normals: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SampleSet:
    """The full sample state for one fitting run.

    ``surface`` and ``sigma`` depend only on the mesh; ``omega`` and
    ``box`` depend on the seed they were drawn with and are meant to be
    rebuilt per iteration via :func:`build_Omega` / :func:`build_Q`.
    """

    surface: SurfaceSamples
    sigma: np.ndarray
    omega: np.ndarray
    box: np.ndarray


def build_P(mesh: TriMesh) -> SurfaceSamples:
    """Extract one surface sample per face of a normalized mesh."""
    mu, nu = mesh.face_frames
    return SurfaceSamples(
        points=mesh.face_centroids.copy(),
        normals=mesh.face_normals.copy(),
        mu=mu.copy(),
        nu=nu.copy(),
    )


def knn_sigma(points: np.ndarray, k: int = 50) -> np.ndarray:
    """Distance from each point to its k-th nearest other point.

    Parameters
    ----------
    points : (n, 3) float array
    k : int
        Neighbor rank (the point itself is excluded). When ``n <= k``
        the rank falls back to ``n - 1`` with a warning.

    Returns
    -------
    (n,) float array
        Exact k-th nearest-neighbor distances.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least two points for neighbor distances")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n <= k:
        warnings.warn(
            f"only {n} points available; using k={n - 1} instead of k={k}",
            stacklevel=2,
        )
        k = n - 1
    dist, _ = cKDTree(points).query(points, k=k + 1)
    return dist[:, k]


def build_Omega(
    surface: SurfaceSamples,
    k: int = 50,
    seed=0,
    sigma: np.ndarray | None = None,
) -> np.ndarray:
    """Draw one Gaussian offset point per surface sample.

    Each surface point spawns a single draw from an isotropic Gaussian
    centered on it with standard deviation ``sigma`` (computed from the
    k-th nearest-neighbor distance unless supplied). The result has
    exactly as many points as the surface set. ``seed`` accepts
    anything ``numpy.random.default_rng`` does, e.g. a sequence like
    ``[run_seed, iteration, 0]`` for per-iteration resampling.
    """
    pts = surface.points
    if sigma is None:
        sigma = knn_sigma(pts, k=k)
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (pts.shape[0],):
        raise ValueError(f"sigma shape {sigma.shape} != ({pts.shape[0]},)")
    rng = np.random.default_rng(seed)
    return pts + sigma[:, None] * rng.standard_normal(pts.shape)


def build_Q(n: int, seed=0) -> np.ndarray:
    """Draw n points i.i.d. uniform in the box [-0.5, 0.5]^3."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.5, 0.5, size=(n, 3))


def build_sample_set(
    mesh: TriMesh,
    k: int = 50,
    n_box: int | None = None,
    seed: int = 0,
) -> SampleSet:
    """Build the initial sample state for a mesh.

    ``n_box`` defaults to the surface sample count. The offset and box
    sets here use ``seed`` directly; per-iteration resampling should
    derive fresh seeds (see :func:`iteration_rng`).
    """
    surface = build_P(mesh)
    sigma = knn_sigma(surface.points, k=k)
    if n_box is None:
        n_box = len(surface)
    omega = build_Omega(surface, sigma=sigma, seed=[seed, 0])
    box = build_Q(n_box, seed=[seed, 1])
    return SampleSet(surface=surface, sigma=sigma, omega=omega, box=box)
