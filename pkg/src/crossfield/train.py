"""Joint fitting loop for the distance model and the face-angle model.

One Adam instance optimizes both models against the weighted loss; the
offset and box point sets are redrawn every iteration from seeds derived
from (run seed, step), so a run is a pure function of its configuration.
Two-step mode reproduces the staged baseline: a distance-only phase
followed by a field-only phase against the frozen distance model.

A run directory accumulates ``config.json``, ``history.csv`` (logged
loss terms; no timestamps, so identical runs produce identical bytes),
``timing.csv`` (per-iteration wall clock, kept separate precisely so
history stays reproducible), and deterministic ``checkpoint_*.bin``
files holding both models.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import Tensor

from .anglenet import AngleModel, cross_from_theta, face_features, predict_theta
from .checkpoint import load_checkpoint, save_checkpoint
from .jets import parameter_gradients
from .losses import (
    LOSS_TERMS,
    FeatureLines,
    LossWeights,
    loss_align_normal,
    loss_align_principal,
    loss_dirichlet,
    loss_dirichlet_far,
    loss_eikonal,
    loss_smoothness,
    tau_schedule,
    total_loss,
)
from .mesh import TriMesh, load_obj
from .sampling import build_Omega, build_Q, build_sample_set
from .sdf import SdfModel

__all__ = [
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "adam_init",
    "adam_step",
    "train",
    "fit_run",
    "load_models",
]


class TrainingDiverged(RuntimeError):
    """Optimization aborted on a non-finite loss value."""


@dataclass
class TrainConfig:
    """Everything that determines a fitting run.

    ``iterations`` is the length of each phase: joint mode runs that
    many steps; two-step mode runs a distance-only phase and then a
    field-only phase of that length each.
    """

    mesh: str = ""
    output_dir: str = "run"
    iterations: int = 10000
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    log_every: int = 10
    checkpoint_every: int = 1000
    two_step_mode: bool = False
    knn: int = 50
    n_box: int | None = None
    grad_clip: float | None = None
    features: str | None = None
    sdf_hidden: tuple[int, ...] = (256, 256, 256, 256)
    weights: LossWeights = field(default_factory=LossWeights)
    tau_plateau: float = 0.2
    tau_decay_end: float = 0.4
    tau_floor: float = 3e-4

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        self.sdf_hidden = tuple(self.sdf_hidden)
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "TrainConfig":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def canonical_json(self) -> str:
        """Serialized semantics of the run: everything except IO paths."""
        data = self.to_json_dict()
        for key in ("mesh", "output_dir", "features"):
            data.pop(key)
        return json.dumps(data, sort_keys=True)


@dataclass
class TrainResult:
    sdf: SdfModel
    angle: AngleModel
    history: list[dict]
    output_dir: Path


# -- optimizer -----------------------------------------------------------------


def adam_init(params: dict[str, Tensor]) -> dict[str, dict]:
    """Fresh per-parameter first/second-moment state."""
    return {
        name: {"step": 0, "m": torch.zeros_like(p), "v": torch.zeros_like(p)}
        for name, p in params.items()
    }


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, Tensor],
    state: dict[str, dict],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected update, in place, for every param in ``grads``."""
    with torch.no_grad():
        for name, g in grads.items():
            p = params[name]
            s = state[name]
            s["step"] += 1
            t = s["step"]
            s["m"].mul_(beta1).add_(g, alpha=1.0 - beta1)
            s["v"].mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            m_hat = s["m"] / (1.0 - beta1**t)
            v_hat = s["v"] / (1.0 - beta2**t)
            p.sub_(lr * m_hat / (v_hat.sqrt() + eps))


def _clip_gradients(grads: dict[str, Tensor], max_norm: float) -> None:
    total = torch.sqrt(sum((g.double() ** 2).sum() for g in grads.values()))
    if float(total) > max_norm:
        scale = max_norm / float(total)
        for g in grads.values():
            g.mul_(scale)


# -- checkpoint bundling -------------------------------------------------------


def _save_models(path, sdf: SdfModel, angle: AngleModel, extra_meta: dict) -> None:
    meta = {
        "sdf": sdf.arch_meta(),
        "angle": {"dtype": str(angle.dtype).replace("torch.", "")},
        "run": extra_meta,
    }
    save_checkpoint(
        path,
        {"sdf": sdf.state_arrays(), "angle": angle.state_arrays()},
        meta=meta,
    )


def load_models(path) -> tuple[SdfModel, AngleModel, dict]:
    """Load the (distance, angle) model pair from a run checkpoint."""
    groups, meta = load_checkpoint(path)
    for group in ("sdf", "angle"):
        if group not in groups:
            raise ValueError(f"{path}: checkpoint has no '{group}' group")
    sm = meta.get("sdf", {})
    sdf = SdfModel(
        hidden=tuple(sm.get("hidden", (256, 256, 256, 256))),
        dtype=getattr(torch, sm.get("dtype", "float64")),
    )
    sdf.load_state_arrays(groups["sdf"])
    am = meta.get("angle", {})
    angle = AngleModel(dtype=getattr(torch, am.get("dtype", "float32")))
    angle.load_state_arrays(groups["angle"])
    return sdf, angle, meta.get("run", {})


# -- the loop ------------------------------------------------------------------


def _check_normalized(mesh: TriMesh) -> None:
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    if lo.min() < -0.5 - 1e-9 or hi.max() > 0.5 + 1e-9:
        raise ValueError(
            "mesh exceeds the unit box; normalize it first (TriMesh.normalized())"
        )
    if abs((hi - lo).max() - 1.0) > 1e-6:
        raise ValueError(
            "mesh does not span the unit box; normalize it first (TriMesh.normalized())"
        )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def train(
    mesh: TriMesh,
    config: TrainConfig,
    feature_lines: FeatureLines | None = None,
) -> TrainResult:
    """Fit both models to a normalized mesh and write the run directory.

    Deterministic for a fixed config: sampling, initialization and
    optimizer state derive from ``config.seed`` alone. Raises
    :class:`TrainingDiverged` if any loss term goes non-finite; history
    rows and checkpoints written up to that point are kept.
    """
    _check_normalized(mesh)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.json")

    sample = build_sample_set(mesh, k=config.knn, n_box=config.n_box, seed=config.seed)
    surface = sample.surface
    n_box = config.n_box if config.n_box is not None else len(surface)

    P = torch.as_tensor(surface.points)
    normals = torch.as_tensor(surface.normals)
    mu = torch.as_tensor(surface.mu)
    nu = torch.as_tensor(surface.nu)
    neighbors = torch.as_tensor(mesh.face_neighbors)
    rotations = torch.as_tensor(mesh.edge_rotations)

    sdf = SdfModel(seed=config.seed, hidden=config.sdf_hidden)
    angle = AngleModel(seed=config.seed + 1)
    feats = torch.as_tensor(face_features(mesh), dtype=angle.dtype)

    D = None
    fl_idx = fl_theta = None
    if feature_lines is not None:
        D = torch.as_tensor(
            feature_lines.face_weights(mesh, rho=config.weights.rho_feature)
        )
        fi, ft = feature_lines.face_directions(mesh)
        if len(fi):
            fl_idx = torch.as_tensor(fi)
            fl_theta = torch.as_tensor(ft)

    named = {f"sdf.{k}": v for k, v in sdf.named_parameters().items()}
    named.update({f"angle.{k}": v for k, v in dict(angle.named_parameters()).items()})
    state = adam_init(named)
    sdf_params = {k: v for k, v in named.items() if k.startswith("sdf.")}
    angle_params = {k: v for k, v in named.items() if k.startswith("angle.")}

    if config.two_step_mode:
        phases = [("distance", config.iterations), ("field", config.iterations)]
    else:
        phases = [("joint", config.iterations)]

    zero = torch.zeros((), dtype=torch.float64)
    history: list[dict] = []
    step = 0

    with open(out / "history.csv", "w", newline="") as hf, open(
        out / "timing.csv", "w", newline=""
    ) as tf:
        hwriter = csv.writer(hf, lineterminator="\n")
        twriter = csv.writer(tf, lineterminator="\n")
        hwriter.writerow(["iteration", "phase", "tau", *LOSS_TERMS, "total"])
        twriter.writerow(["iteration", "wall_ms"])
        try:
            for phase, phase_iters in phases:
                for it in range(phase_iters):
                    t0 = time.perf_counter()
                    tau = tau_schedule(
                        it,
                        phase_iters,
                        plateau=config.tau_plateau,
                        decay_end=config.tau_decay_end,
                        floor=config.tau_floor,
                    )
                    use_sdf_terms = phase != "field"
                    use_field_terms = phase != "distance"

                    f_P, g_P, H_P = sdf.query(P, order=2)
                    terms: dict[str, Tensor] = {}
                    if use_sdf_terms:
                        omega = torch.as_tensor(
                            build_Omega(
                                surface, sigma=sample.sigma, seed=[config.seed, step, 0]
                            )
                        )
                        box = torch.as_tensor(
                            build_Q(n_box, seed=[config.seed, step, 1])
                        )
                        _, g_O, _ = sdf.query(omega, order=1)
                        f_Q, _, _ = sdf.query(box, order=0)
                        terms["eikonal"] = loss_eikonal(torch.cat([g_P, g_O]))
                        terms["dirichlet"] = loss_dirichlet(f_P)
                        terms["dirichlet_far"] = loss_dirichlet_far(
                            f_Q, rho=config.weights.rho_far
                        )
                        terms["align_normal"] = loss_align_normal(H_P, normals)
                    if use_field_terms:
                        theta = predict_theta(angle, feats).to(torch.float64)
                        if fl_idx is not None:
                            theta = theta.clone()
                            theta[fl_idx] = fl_theta
                        alpha, beta = cross_from_theta(theta, mu, nu)
                        terms["align_principal"] = loss_align_principal(
                            H_P, alpha, beta, weights=D
                        )
                        terms["smoothness"] = loss_smoothness(
                            alpha, beta, neighbors, rotations
                        )

                    padded = {name: terms.get(name, zero) for name in LOSS_TERMS}
                    total = total_loss(padded, config.weights, tau=tau)

                    if phase == "distance":
                        active = sdf_params
                    elif phase == "field":
                        active = angle_params
                    else:
                        active = named
                    grads = parameter_gradients(total, active)
                    if config.grad_clip is not None:
                        _clip_gradients(grads, config.grad_clip)
                    adam_step(
                        active,
                        grads,
                        state,
                        lr=config.learning_rate,
                        beta1=config.beta1,
                        beta2=config.beta2,
                        eps=config.eps,
                    )

                    last = it == phase_iters - 1
                    if it % config.log_every == 0 or last:
                        row = {
                            "iteration": step,
                            "phase": phase,
                            "tau": tau,
                            **{
                                name: float(terms[name].detach())
                                if name in terms
                                else None
                                for name in LOSS_TERMS
                            },
                            "total": float(total.detach()),
                        }
                        history.append(row)
                        hwriter.writerow(
                            [
                                step,
                                phase,
                                _fmt(tau),
                                *[
                                    _fmt(row[name]) if row[name] is not None else ""
                                    for name in LOSS_TERMS
                                ],
                                _fmt(row["total"]),
                            ]
                        )
                        # keep the files tail-able during long runs
                        hf.flush()
                        tf.flush()
                    twriter.writerow(
                        [step, f"{(time.perf_counter() - t0) * 1e3:.3f}"]
                    )
                    step += 1
                    if step % config.checkpoint_every == 0 or last:
                        _save_models(
                            out / f"checkpoint_{step:06d}.bin",
                            sdf,
                            angle,
                            {"iteration": step, "phase": phase},
                        )
        except FloatingPointError as err:
            raise TrainingDiverged(
                f"aborted at iteration {step}: {err}"
            ) from err

    _save_models(
        out / "checkpoint_final.bin", sdf, angle, {"iteration": step, "phase": phases[-1][0]}
    )
    return TrainResult(sdf=sdf, angle=angle, history=history, output_dir=out)


def fit_run(config: TrainConfig) -> TrainResult:
    """Load the mesh (and features) named by the config, normalize, train."""
    if not config.mesh:
        raise ValueError("config.mesh must name an OBJ file")
    mesh = load_obj(config.mesh).normalized()
    features = (
        FeatureLines.from_json(config.features) if config.features else None
    )
    return train(mesh, config, feature_lines=features)
