"""Closed-form principal-direction oracles for shapes whose curvature
directions are known analytically. Used to score how well an optimized
cross field tracks true principal directions.

An oracle is a callable ``mesh -> (directions, valid)`` where
``directions`` is (F, 3) unit vectors (arbitrary where invalid) and
``valid`` flags the faces where a principal direction is defined --
umbilic regions (sphere caps, planes) are excluded.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh

__all__ = ["torus_oracle", "cylinder_oracle", "sphere_oracle", "named_oracle"]


def torus_oracle(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Principal directions of a torus around the z-axis.

    Every point of a torus (major radius > 0) is non-umbilic; one
    principal direction is the azimuthal tangent (-y, x, 0)/|.|.
    """
    c = mesh.face_centroids
    d = np.stack([-c[:, 1], c[:, 0], np.zeros(len(c))], axis=1)
    norms = np.linalg.norm(d, axis=1)
    valid = norms > 1e-12
    d[valid] /= norms[valid, None]
    d[~valid] = (1.0, 0.0, 0.0)
    return d, valid


def cylinder_oracle(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Principal directions of a capped cylinder along the z-axis.

    On the tube, principal directions are the axis and the circumference;
    the axis direction is returned. Cap faces are planar (umbilic) and are
    marked invalid, detected by their normals pointing along the axis.
    """
    n = mesh.face_normals
    valid = np.abs(n[:, 2]) < 0.5
    d = np.zeros((mesh.n_faces, 3))
    d[:, 2] = 1.0
    return d, valid


def sphere_oracle(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Spheres are umbilic everywhere: no face has a preferred direction."""
    d = np.zeros((mesh.n_faces, 3))
    d[:, 0] = 1.0
    return d, np.zeros(mesh.n_faces, dtype=bool)


_ORACLES = {
    "torus": torus_oracle,
    "cylinder": cylinder_oracle,
    "sphere": sphere_oracle,
}


def named_oracle(name: str):
    """Look up a principal-direction oracle by shape name."""
    try:
        return _ORACLES[name]
    except KeyError:
        raise ValueError(f"unknown oracle {name!r}; choose from {sorted(_ORACLES)}") from None
