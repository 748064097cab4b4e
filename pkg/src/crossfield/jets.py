"""Exact derivatives of sine-activated MLPs.

The forward pass propagates (value, gradient, Hessian) jets through every
layer analytically, so gradients and Hessians of the network with respect
to its *input* are exact to machine precision -- no finite differences.
The jet propagation is wrapped in a hand-written reverse pass
(`torch.autograd.Function`), which means any scalar built from values,
gradients or Hessians can in turn be differentiated with respect to the
network *parameters* for training (third-order mixed derivatives).

Jets are stored as (batch, columns, width) tensors. Column 0 carries the
value, columns 1..3 the gradient, columns 4..9 the packed symmetric
Hessian in the order (xx, xy, xz, yy, yz, zz).
"""

from __future__ import annotations

import math

import torch
from torch import Tensor

__all__ = ["SineNet", "eval_with_derivatives", "parameter_gradients", "HESS_PAIRS"]

# packed upper-triangle layout for the symmetric Hessian
HESS_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
# packed -> full (3,3) gather indices
_UNPACK = (0, 1, 2, 1, 3, 4, 2, 4, 5)

_COLS = {0: 1, 1: 4, 2: 10}


class SineNet(torch.nn.Module):
    """MLP with sine activations, f: R^3 -> R.

    `omega[i]` scales the i-th preactivation inside the sine; the final
    layer is linear. Weight init follows the usual scheme for these nets:
    first layer uniform in [-1/3, 1/3], later layers uniform in
    [-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0] with omega0 = 30.
    """

    def __init__(
        self,
        hidden: tuple[int, ...] = (256, 256, 256, 256),
        first_omega: float = 30.0,
        hidden_omega: float = 30.0,
        seed: int = 0,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        widths = [3, *hidden, 1]
        self.omegas = tuple(
            [first_omega] + [hidden_omega] * (len(hidden) - 1)
        )  # one omega per sine layer; final layer has none
        gen = torch.Generator().manual_seed(seed)
        layers = []
        for i, (fin, fout) in enumerate(zip(widths[:-1], widths[1:])):
            lin = torch.nn.Linear(fin, fout, dtype=dtype)
            if i == 0:
                bound = 1.0 / fin
            else:
                # the /omega in the bound cancels the omega inside the sine,
                # keeping activation statistics layer-independent
                bound = math.sqrt(6.0 / fin) / self.omegas[min(i, len(self.omegas) - 1)]
            with torch.no_grad():
                lin.weight.uniform_(-bound, bound, generator=gen)
                lin.bias.uniform_(-bound, bound, generator=gen)
            layers.append(lin)
        self.layers = torch.nn.ModuleList(layers)

    @property
    def dtype(self) -> torch.dtype:
        return self.layers[0].weight.dtype

    def forward(self, x: Tensor) -> Tensor:
        """Plain value-only forward, (B, 3) -> (B,)."""
        return eval_with_derivatives(self, x, order=0)[0]


def _input_jets(x: Tensor, order: int) -> Tensor:
    b = x.shape[0]
    cols = _COLS[order]
    z = x.new_zeros(b, cols, 3)
    z[:, 0] = x
    if order >= 1:
        z[:, 1:4] = torch.eye(3, dtype=x.dtype, device=x.device)
    return z


class _JetForward(torch.autograd.Function):
    """Propagate jets through the net; backward accumulates into params."""

    @staticmethod
    def forward(ctx, x: Tensor, order: int, omegas: tuple[float, ...], *params: Tensor):
        n_layers = len(params) // 2
        weights = params[0::2]
        biases = params[1::2]
        z = _input_jets(x, order)
        inputs = []  # input jets per layer
        preacts = []  # preactivation jets per sine layer
        for i in range(n_layers):
            inputs.append(z)
            u = z @ weights[i].t()
            u[:, 0] += biases[i]
            if i == n_layers - 1:
                z = u
                break
            preacts.append(u)
            z = _sine_jet(u, omegas[i], order)
        ctx.order = order
        ctx.omegas = omegas
        ctx.save_for_backward(*params, *inputs, *preacts)
        ctx.n_layers = n_layers
        return z

    @staticmethod
    def backward(ctx, gout: Tensor):
        order = ctx.order
        n = ctx.n_layers
        saved = ctx.saved_tensors
        weights = saved[0 : 2 * n : 2]
        inputs = saved[2 * n : 3 * n]
        preacts = saved[3 * n :]
        g_params: list[Tensor | None] = [None] * (2 * n)
        gz = gout
        for i in range(n - 1, -1, -1):
            if i < n - 1:
                gz = _sine_jet_backward(gz, preacts[i], ctx.omegas[i], order)
            zin = inputs[i]
            b, c, fin = zin.shape
            fout = gz.shape[2]
            g_params[2 * i] = gz.reshape(b * c, fout).t() @ zin.reshape(b * c, fin)
            g_params[2 * i + 1] = gz[:, 0].sum(dim=0)
            gz = gz @ weights[i]
        gx = gz[:, 0]  # value column of the input jet is the input itself
        return (gx, None, None, *g_params)


def _sine_jet(u: Tensor, omega: float, order: int) -> Tensor:
    """Apply y = sin(omega * u) to a jet tensor."""
    uv = u[:, 0:1]
    s = torch.sin(omega * uv)
    if order == 0:
        return s
    c = torch.cos(omega * uv)
    out = torch.empty_like(u)
    out[:, 0:1] = s
    out[:, 1:] = (omega * c) * u[:, 1:]
    if order == 2:
        g = u[:, 1:4]
        w = omega * omega * s
        for k, (i, j) in enumerate(HESS_PAIRS):
            out[:, 4 + k] -= w[:, 0] * g[:, i] * g[:, j]
    return out


def _sine_jet_backward(gz: Tensor, u: Tensor, omega: float, order: int) -> Tensor:
    """Adjoint of `_sine_jet` with respect to the preactivation jets."""
    uv = u[:, 0:1]
    s = torch.sin(omega * uv)
    c = torch.cos(omega * uv)
    if order == 0:
        return (omega * c) * gz
    gu = (omega * c) * gz  # correct for all derivative columns; col 0 fixed below
    w2s = omega * omega * s
    # value column: d(out_d)/d(u_v) = -omega^2 s * u_d for every derivative
    # column, plus -omega^3 c * outer_k on the Hessian columns
    acc = (gz[:, 1:] * u[:, 1:]).sum(dim=1)
    gu_v = omega * c[:, 0] * gz[:, 0] - w2s[:, 0] * acc
    if order == 2:
        g = u[:, 1:4]
        gh = gz[:, 4:]
        w3c = (omega**3) * c[:, 0]
        outer_acc = torch.zeros_like(acc)
        for k, (i, j) in enumerate(HESS_PAIRS):
            outer_acc += gh[:, k] * g[:, i] * g[:, j]
        gu_v = gu_v - w3c * outer_acc
        # gradient columns pick up the outer-product adjoint
        m = w2s[:, 0]
        gu[:, 1] -= m * (2 * gh[:, 0] * g[:, 0] + gh[:, 1] * g[:, 1] + gh[:, 2] * g[:, 2])
        gu[:, 2] -= m * (gh[:, 1] * g[:, 0] + 2 * gh[:, 3] * g[:, 1] + gh[:, 4] * g[:, 2])
        gu[:, 3] -= m * (gh[:, 2] * g[:, 0] + gh[:, 4] * g[:, 1] + 2 * gh[:, 5] * g[:, 2])
    gu[:, 0] = gu_v
    return gu


def eval_with_derivatives(
    net: SineNet, x: Tensor, order: int = 2
) -> tuple[Tensor, Tensor | None, Tensor | None]:
    """Evaluate the network and its exact input-derivatives.

    Parameters
    ----------
    net : SineNet
    x : (B, 3) tensor matching the network dtype
    order : 0 (value), 1 (+gradient) or 2 (+Hessian)

    Returns
    -------
    (value, gradient, hessian)
        value (B,); gradient (B, 3) or None; hessian (B, 3, 3) symmetric
        by construction, or None. All differentiable with respect to the
        network parameters.
    """
    if not isinstance(x, Tensor):
        raise TypeError(f"expected a torch.Tensor input, got {type(x).__name__}")
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"expected (B, 3) input, got {tuple(x.shape)}")
    if x.dtype != net.dtype:
        raise TypeError(f"input dtype {x.dtype} != network dtype {net.dtype}")
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    params = []
    for lin in net.layers:
        params += [lin.weight, lin.bias]
    out = _JetForward.apply(x, order, net.omegas, *params)
    if out.shape[2] != 1:
        raise ValueError("derivative evaluation requires a scalar-output network")
    out = out[:, :, 0]
    if not torch.isfinite(out).all():
        raise FloatingPointError("non-finite values in network derivative evaluation")
    value = out[:, 0]
    grad = out[:, 1:4] if order >= 1 else None
    hess = None
    if order == 2:
        packed = out[:, 4:10]
        idx = torch.tensor(_UNPACK, device=x.device)
        hess = packed[:, idx].reshape(-1, 3, 3)
    return value, grad, hess


def parameter_gradients(
    loss: Tensor, named_params: dict[str, Tensor], retain_graph: bool = False
) -> dict[str, Tensor]:
    """Reverse-accumulate d(loss)/d(param) for every named parameter.

    Raises FloatingPointError if the loss is non-finite. Parameters that do
    not influence the loss get zero gradients. Pass retain_graph=True to
    differentiate through the same evaluation more than once.
    """
    if not torch.isfinite(loss):
        raise FloatingPointError(f"loss is non-finite: {float(loss)}")
    names = list(named_params)
    grads = torch.autograd.grad(
        loss,
        [named_params[n] for n in names],
        allow_unused=True,
        materialize_grads=True,
        retain_graph=retain_graph,
    )
    return dict(zip(names, grads))
