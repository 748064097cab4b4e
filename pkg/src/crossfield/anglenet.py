"""Per-face rotation-angle predictor and cross-field construction.

The predictor is a pointwise encoder/decoder ResNet-MLP: bottleneck
residual blocks at widths 256 and 512 with concatenation skip connections
between mirrored stages, ending in a sigmoid so the output ``omega`` lies
in [0, 1]; the rotation angle is ``theta = 2 * pi * omega``. There is no
neighborhood aggregation -- every face is mapped independently from its
12-d feature row [centroid, normal, mu, nu], and field smoothness comes
from the loss, not the architecture.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import torch
from torch import Tensor

from .checkpoint import load_checkpoint, save_checkpoint
from .mesh import TriMesh

__all__ = [
    "AngleModel",
    "DirectThetaModel",
    "face_features",
    "predict_theta",
    "cross_from_theta",
]


def face_features(mesh: TriMesh) -> np.ndarray:
    """(F, 12) feature rows [centroid(3), normal(3), mu(3), nu(3)].

    Meant to be built from a normalized mesh so centroids live in
    [-0.5, 0.5]^3.
    """
    mu, nu = mesh.face_frames
    return np.concatenate([mesh.face_centroids, mesh.face_normals, mu, nu], axis=1)


def _init_linear(lin: torch.nn.Linear, gen: torch.Generator) -> None:
    # the stock Linear reset, but driven by an explicit generator
    bound = 1.0 / math.sqrt(lin.in_features)
    with torch.no_grad():
        lin.weight.uniform_(-bound, bound, generator=gen)
        lin.bias.uniform_(-bound, bound, generator=gen)


class _Bottleneck(torch.nn.Module):
    """project-down / transform / project-up residual block."""

    def __init__(self, in_width: int, width: int, inner: int, gen: torch.Generator, dtype):
        super().__init__()
        self.reduce = torch.nn.Linear(in_width, inner, dtype=dtype)
        self.inner = torch.nn.Linear(inner, inner, dtype=dtype)
        self.expand = torch.nn.Linear(inner, width, dtype=dtype)
        self.project = None
        if in_width != width:
            self.project = torch.nn.Linear(in_width, width, dtype=dtype)
        for lin in (self.reduce, self.inner, self.expand, self.project):
            if lin is not None:
                _init_linear(lin, gen)

    def forward(self, h: Tensor) -> Tensor:
        s = h if self.project is None else self.project(h)
        t = torch.relu(self.reduce(h))
        t = torch.relu(self.inner(t))
        t = self.expand(t)
        return torch.relu(s + t)


class _Group(torch.nn.Module):
    def __init__(self, n_blocks: int, in_width: int, width: int, inner: int, gen, dtype):
        super().__init__()
        blocks = []
        for k in range(n_blocks):
            blocks.append(_Bottleneck(in_width if k == 0 else width, width, inner, gen, dtype))
        self.blocks = torch.nn.ModuleList(blocks)

    def forward(self, h: Tensor) -> Tensor:
        for b in self.blocks:
            h = b(h)
        return h


class AngleModel(torch.nn.Module):
    """12-d per-face features -> omega in [0, 1].

    Stages: stem 12->256; three encoder groups at width 256 with 3/4/6
    bottlenecks; a width-512 bridge (3 bottlenecks); three width-512
    decoder groups (3/4/6 bottlenecks) whose inputs concatenate the
    mirrored encoder output; head 512->32->1 with a sigmoid. The final
    layer's weights are drawn from N(0, 0.2) so the initial angles cluster
    around 2*pi*sigmoid(~0).
    """

    def __init__(self, seed: int = 0, dtype: torch.dtype = torch.float32):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.stem = torch.nn.Linear(12, 256, dtype=dtype)
        _init_linear(self.stem, gen)
        self.enc1 = _Group(3, 256, 256, 64, gen, dtype)
        self.enc2 = _Group(4, 256, 256, 64, gen, dtype)
        self.enc3 = _Group(6, 256, 256, 64, gen, dtype)
        self.bridge = _Group(3, 256, 512, 128, gen, dtype)
        self.dec3 = _Group(3, 512 + 256, 512, 128, gen, dtype)
        self.dec2 = _Group(4, 512 + 256, 512, 128, gen, dtype)
        self.dec1 = _Group(6, 512 + 256, 512, 128, gen, dtype)
        self.head1 = torch.nn.Linear(512, 32, dtype=dtype)
        _init_linear(self.head1, gen)
        self.head2 = torch.nn.Linear(32, 1, dtype=dtype)
        with torch.no_grad():
            self.head2.weight.normal_(0.0, 0.2, generator=gen)
            self.head2.bias.zero_()
        self.seed = seed

    @property
    def dtype(self) -> torch.dtype:
        return self.stem.weight.dtype

    def forward(self, feat: Tensor) -> Tensor:
        if feat.ndim != 2 or feat.shape[1] != 12:
            raise ValueError(f"expected (F, 12) features, got {tuple(feat.shape)}")
        h = torch.relu(self.stem(feat))
        e1 = self.enc1(h)
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        b = self.bridge(e3)
        d3 = self.dec3(torch.cat([b, e3], dim=1))
        d2 = self.dec2(torch.cat([d3, e2], dim=1))
        d1 = self.dec1(torch.cat([d2, e1], dim=1))
        t = torch.relu(self.head1(d1))
        return torch.sigmoid(self.head2(t))[:, 0]

    # -- checkpointing ---------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.detach().cpu().numpy() for k, v in self.named_parameters()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        named = dict(self.named_parameters())
        if set(arrays) != set(named):
            raise ValueError("parameter names do not match this architecture")
        with torch.no_grad():
            for k, v in arrays.items():
                named[k].copy_(torch.from_numpy(np.ascontiguousarray(v)))

    def save(self, path: str | Path) -> None:
        save_checkpoint(
            path,
            {"angle": self.state_arrays()},
            meta={"angle": {"dtype": str(self.dtype).replace("torch.", "")}},
        )

    @classmethod
    def load(cls, path: str | Path) -> "AngleModel":
        groups, meta = load_checkpoint(path)
        if "angle" not in groups:
            raise ValueError(f"{path}: checkpoint has no 'angle' group")
        m = meta.get("angle", {})
        model = cls(dtype=getattr(torch, m.get("dtype", "float32")))
        model.load_state_arrays(groups["angle"])
        return model


class DirectThetaModel(torch.nn.Module):
    """Ablation: free per-face angle parameters, no network.

    Keeps the `predict_theta` interface (features are only used for their
    row count) so the trainer can swap it in behind a flag.
    """

    def __init__(self, n_faces: int, seed: int = 0, dtype: torch.dtype = torch.float64):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        init = torch.empty(n_faces, dtype=dtype).normal_(0.0, 0.2, generator=gen)
        self.raw = torch.nn.Parameter(init)

    @property
    def dtype(self) -> torch.dtype:
        return self.raw.dtype

    def forward(self, feat: Tensor) -> Tensor:
        if feat.shape[0] != self.raw.shape[0]:
            raise ValueError(
                f"field has {self.raw.shape[0]} faces but features have {feat.shape[0]} rows"
            )
        return torch.sigmoid(self.raw)


def predict_theta(model: torch.nn.Module, features) -> Tensor:
    """theta = 2*pi*omega for a batch of feature rows.

    features may be a tensor or array-like; it is converted to the
    model dtype.
    """
    features = torch.as_tensor(features, dtype=model.dtype)
    return 2.0 * math.pi * model(features)


def cross_from_theta(theta, mu, nu):
    """Rotate the local frame by theta within the tangent plane.

    alpha = mu cos(theta) + nu sin(theta); beta = nu cos(theta) - mu sin(theta).
    Together with the normal, (alpha, beta) represent the cross
    {±alpha, ±beta}; advancing theta by pi/2 maps alpha -> beta, beta -> -alpha.

    Tensor theta keeps everything in torch (differentiable); otherwise
    the computation runs in numpy and returns ndarrays.
    """
    if isinstance(theta, Tensor):
        mu = torch.as_tensor(mu, dtype=theta.dtype)
        nu = torch.as_tensor(nu, dtype=theta.dtype)
        c = torch.cos(theta)[:, None]
        s = torch.sin(theta)[:, None]
    else:
        theta = np.asarray(theta, dtype=np.float64)
        mu = np.asarray(mu, dtype=np.float64)
        nu = np.asarray(nu, dtype=np.float64)
        c = np.cos(theta)[:, None]
        s = np.sin(theta)[:, None]
    alpha = c * mu + s * nu
    beta = c * nu - s * mu
    return alpha, beta
