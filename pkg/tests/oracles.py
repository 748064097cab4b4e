"""Independent reference implementations used to cross-check the package.

Everything in here is deliberately written the slow, obvious way (finite
differences, closed forms, brute-force loops) so test expectations do not
share code with the implementation under test.
"""

from __future__ import annotations

import math

import numpy as np
import torch


# -- finite differences -------------------------------------------------------


def fd_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function f: (3,) -> float."""
    g = np.zeros(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of a scalar function f: (3,) -> float."""
    H = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            ei = np.zeros(3)
            ej = np.zeros(3)
            ei[i] = h
            ej[j] = h
            H[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h * h)
    return H


def fd_directional_param_derivative(loss_fn, params: list[torch.Tensor], direction: list[torch.Tensor], h: float = 1e-6) -> float:
    """(loss(p + h v) - loss(p - h v)) / 2h along a parameter-space direction."""

    def shifted(sign: float) -> float:
        with torch.no_grad():
            for p, v in zip(params, direction):
                p.add_(sign * h * v)
        try:
            with torch.no_grad():
                val = float(loss_fn())
        finally:
            with torch.no_grad():
                for p, v in zip(params, direction):
                    p.add_(-sign * h * v)
        return val

    return (shifted(1.0) - shifted(-1.0)) / (2 * h)


# -- closed-form signed distance functions ------------------------------------


class SphereSdf:
    """f(x) = |x - c| - r with exact gradient and Hessian."""

    def __init__(self, radius: float, center=(0.0, 0.0, 0.0)):
        self.r = radius
        self.c = np.asarray(center, dtype=np.float64)

    def query_np(self, pts: np.ndarray):
        d = pts - self.c
        n = np.linalg.norm(d, axis=1)
        f = n - self.r
        g = d / n[:, None]
        eye = np.broadcast_to(np.eye(3), (len(pts), 3, 3))
        H = (eye - g[:, :, None] * g[:, None, :]) / n[:, None, None]
        return f, g, H

    def query(self, pts: torch.Tensor, order: int = 2):
        f, g, H = self.query_np(pts.detach().cpu().numpy())
        t = lambda a: torch.as_tensor(a, dtype=pts.dtype)
        if order == 0:
            return t(f), None, None
        if order == 1:
            return t(f), t(g), None
        return t(f), t(g), t(H)


class CylinderSdf:
    """Infinite cylinder around the z-axis: f = sqrt(x^2 + y^2) - r."""

    def __init__(self, radius: float):
        self.r = radius

    def query_np(self, pts: np.ndarray):
        xy = pts[:, :2]
        n = np.linalg.norm(xy, axis=1)
        f = n - self.r
        g = np.zeros_like(pts)
        g[:, :2] = xy / n[:, None]
        H = np.zeros((len(pts), 3, 3))
        u = xy / n[:, None]
        eye2 = np.broadcast_to(np.eye(2), (len(pts), 2, 2))
        H[:, :2, :2] = (eye2 - u[:, :, None] * u[:, None, :]) / n[:, None, None]
        return f, g, H

    def query(self, pts: torch.Tensor, order: int = 2):
        f, g, H = self.query_np(pts.detach().cpu().numpy())
        t = lambda a: torch.as_tensor(a, dtype=pts.dtype)
        if order == 0:
            return t(f), None, None
        if order == 1:
            return t(f), t(g), None
        return t(f), t(g), t(H)


# -- misc closed forms ---------------------------------------------------------


def chi3_mean() -> float:
    """E[ |N(0, I_3)| ]: mean length of a standard 3D Gaussian draw."""
    return math.sqrt(2.0) * math.gamma(2.0) / math.gamma(1.5)


def smoothness_pair_term(theta_p: float, frame_p, theta_q: float, frame_q, rot_qp: np.ndarray) -> float:
    """Brute-force single-pair smoothness term.

    frame_* is (mu, nu, n); rot_qp carries q's tangent plane onto p's.
    Returns |a_p . R a_q| + |a_p . R b_q| + |b_p . R a_q| + |b_p . R b_q| - 2.
    """
    def cross_dirs(theta, frame):
        mu, nu, _ = frame
        a = math.cos(theta) * mu + math.sin(theta) * nu
        b = math.cos(theta) * nu - math.sin(theta) * mu
        return a, b

    ap, bp = cross_dirs(theta_p, frame_p)
    aq, bq = cross_dirs(theta_q, frame_q)
    aq = rot_qp @ aq
    bq = rot_qp @ bq
    return (
        abs(ap @ aq) + abs(ap @ bq) + abs(bp @ aq) + abs(bp @ bq) - 2.0
    )
