"""Neural signed-distance model: a sine-activated MLP queried in mesh
coordinates, with derivative queries running through the exact jet engine.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import Tensor

from .checkpoint import load_checkpoint, save_checkpoint
from .jets import SineNet, eval_with_derivatives

__all__ = ["SdfModel"]

# mesh coordinates live in [-0.5, 0.5]^3; the net sees [-1, 1]^3
_INPUT_SCALE = 2.0


class SdfModel:
    """SDF network f(x; theta) over normalized mesh coordinates.

    The network input is the mesh coordinate scaled by 2, and returned
    gradients / Hessians are chain-ruled back so that all derivatives are
    with respect to mesh coordinates. Defaults: four hidden layers of
    width 256, sine activations.
    """

    def __init__(
        self,
        seed: int = 0,
        hidden: tuple[int, ...] = (256, 256, 256, 256),
        dtype: torch.dtype = torch.float64,
    ):
        self.net = SineNet(hidden=hidden, seed=seed, dtype=dtype)
        self.hidden = tuple(hidden)
        self.seed = seed

    @property
    def dtype(self) -> torch.dtype:
        return self.net.dtype

    def query(
        self, points, order: int = 2
    ) -> tuple[Tensor, Tensor | None, Tensor | None]:
        """Evaluate (f, grad f, Hess f) at mesh-space points.

        points may be a torch tensor or any array-like of shape (n, 3);
        it is converted to the model dtype. order 0 returns
        (f, None, None); order 1 adds the gradient; order 2 adds the
        symmetric Hessian. Differentiable w.r.t. the network parameters.
        """
        points = torch.as_tensor(points, dtype=self.dtype)
        f, g, h = eval_with_derivatives(self.net, points * _INPUT_SCALE, order=order)
        if g is not None:
            g = g * _INPUT_SCALE
        if h is not None:
            h = h * (_INPUT_SCALE * _INPUT_SCALE)
        return f, g, h

    # -- parameter plumbing ---------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        return dict(self.net.named_parameters())

    def parameters(self) -> list[Tensor]:
        return list(self.net.parameters())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.detach().cpu().numpy() for k, v in self.named_parameters().items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        named = self.named_parameters()
        if set(arrays) != set(named):
            raise ValueError("parameter names do not match this architecture")
        with torch.no_grad():
            for k, v in arrays.items():
                named[k].copy_(torch.from_numpy(np.ascontiguousarray(v)))

    def arch_meta(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "first_omega": self.net.omegas[0],
            "hidden_omega": self.net.omegas[-1] if len(self.net.omegas) > 1 else self.net.omegas[0],
            "dtype": str(self.dtype).replace("torch.", ""),
        }

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, {"sdf": self.state_arrays()}, meta={"sdf": self.arch_meta()})

    @classmethod
    def load(cls, path: str | Path) -> "SdfModel":
        groups, meta = load_checkpoint(path)
        if "sdf" not in groups:
            raise ValueError(f"{path}: checkpoint has no 'sdf' group")
        m = meta.get("sdf", {})
        model = cls(
            hidden=tuple(m.get("hidden", (256, 256, 256, 256))),
            dtype=getattr(torch, m.get("dtype", "float64")),
        )
        model.load_state_arrays(groups["sdf"])
        return model
