"""Canonical training runs shared by the acceptance suite.

The heavyweight criteria evaluate trained models. Each named run below
is fully determined by (shape, config); its artifacts live in a cache
directory keyed by a content hash, so the expensive fit happens once
and later test invocations just load the results. A missing cache entry
is trained inline — correct anywhere, slow on first run.

Run this module directly to pre-warm entries:

    python3 tests/acceptance_helpers.py sphere_a2 torus_a4 ...

(no arguments trains everything in queue order). Keep one trainer at a
time: concurrent invocations of the same entry would race.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import replace
from pathlib import Path

from crossfield import shapes
from crossfield.mesh import TriMesh, write_obj
from crossfield.train import TrainConfig, fit_run

CACHE = Path(__file__).resolve().parent / "run_cache"

_SHAPES = {
    "sphere": lambda: shapes.uv_sphere(),
    "torus": lambda: shapes.torus(),
    "cylinder": lambda: shapes.capped_cylinder(),
    "bumpy": lambda: shapes.bumpy_sphere(),
    "genus2": lambda: shapes.genus2_surface(grid=28),
}

# name -> (shape, config). iterations=2000/10000 for the sphere/torus
# quality gates; the rest are sized to converge at desk scale.
RUNS: dict[str, tuple[str, TrainConfig]] = {
    "sphere_a2": (
        "sphere",
        TrainConfig(iterations=2000, checkpoint_every=1000, seed=0),
    ),
    "torus_a4": (
        "torus",
        TrainConfig(iterations=10000, checkpoint_every=2000, seed=0),
    ),
    "cylinder_a4": (
        "cylinder",
        TrainConfig(iterations=5000, checkpoint_every=2500, seed=0),
    ),
    "bumpy_joint": (
        "bumpy",
        TrainConfig(iterations=2000, checkpoint_every=2000, seed=0),
    ),
    "bumpy_twostep": (
        "bumpy",
        TrainConfig(
            iterations=2000, checkpoint_every=2000, seed=0, two_step_mode=True
        ),
    ),
    "genus2": (
        "genus2",
        TrainConfig(iterations=1200, checkpoint_every=1200, seed=0),
    ),
}

QUEUE_ORDER = [
    "sphere_a2",
    "torus_a4",
    "cylinder_a4",
    "bumpy_joint",
    "bumpy_twostep",
    "genus2",
]


def shape_mesh(name: str) -> TriMesh:
    return _SHAPES[name]().normalized()


def run_dir(name: str) -> Path:
    shape_name, cfg = RUNS[name]
    mesh = shape_mesh(shape_name)
    h = hashlib.sha256()
    h.update(cfg.canonical_json().encode())
    h.update(mesh.vertices.tobytes())
    h.update(mesh.faces.tobytes())
    return CACHE / f"{name}_{h.hexdigest()[:16]}"


def ensure_run(name: str) -> Path:
    """Return the run directory for a named run, training it if absent."""
    shape_name, cfg = RUNS[name]
    out = run_dir(name)
    if (out / "checkpoint_final.bin").exists():
        return out
    out.mkdir(parents=True, exist_ok=True)
    mesh = shape_mesh(shape_name)
    obj = out / "mesh.obj"
    write_obj(obj, mesh.vertices, mesh.faces)
    fit_run(replace(cfg, mesh=str(obj), output_dir=str(out)))
    return out


def main(argv: list[str]) -> None:
    names = argv or QUEUE_ORDER
    for name in names:
        if name not in RUNS:
            raise SystemExit(f"unknown run '{name}'; choose from {sorted(RUNS)}")
        print(f"[{name}] ensuring...", flush=True)
        out = ensure_run(name)
        print(f"[{name}] ready at {out}", flush=True)


if __name__ == "__main__":
    main(sys.argv[1:])
