"""Command-line interface for fitting, analyzing and scoring cross fields.

Subcommands
-----------
fit
    Train the distance and angle models on a triangle mesh. Writes
    checkpoints, a loss history, the final cross field, a singularity
    report and a run manifest into one output directory.
analyze
    Load a checkpoint, rebuild the cross field and report singular
    vertices (optionally alignment against an analytic oracle) as JSON.
export-field
    Load a checkpoint and write the cross field to a ROSY text file.
eval-quad
    Score a quad mesh against a reference triangle mesh and report the
    quality metrics as JSON.

Command-line flags override values from ``--config``; the merged
configuration saved in the run directory is the source of record. Set
``CROSSFIELD_THREADS`` to bound the number of worker threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .analysis import (
    SingularityReport,
    alignment_error,
    export_field,
    extract_field,
    singularities,
)
from .analytic import named_oracle
from .mesh import TriMesh, load_obj
from .quadmetrics import evaluate_quad, load_quad_obj
from .train import TrainConfig, TrainingDiverged, fit_run, load_models

THREAD_ENV = "CROSSFIELD_THREADS"


@dataclass(frozen=True)
class RunManifest:
    """Record of how a run directory was produced.

    The config file it names is the source of record: re-running
    ``fit --config <output_dir>/config.json`` reproduces the run.
    """

    subcommand: str
    argv: list[str]
    config: str
    mesh: str
    output_dir: str
    seed: int
    two_step_mode: bool

    def to_json_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))


def _load_normalized(path: str) -> TriMesh:
    """Load a triangle mesh the way training does."""
    return load_obj(path).normalized()


def _singularity_dict(report: SingularityReport, mesh: TriMesh) -> dict:
    singular = [
        {"vertex": int(v), "index": float(report.index[v])}
        for v in report.singular_vertices()
    ]
    return {
        "n_vertices": len(mesh.vertices),
        "n_faces": len(mesh.faces),
        "total_index": float(report.total_index),
        "euler_characteristic": int(report.euler_characteristic),
        "n_boundary_vertices": int(len(report.boundary_vertices)),
        "n_singular": len(singular),
        "singular": singular,
    }


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_from_args(args: argparse.Namespace) -> TrainConfig:
    config = TrainConfig.load(args.config) if args.config else TrainConfig()
    overrides = {
        name: value
        for name, value in [
            ("mesh", args.mesh),
            ("output_dir", args.out),
            ("iterations", args.iters),
            ("learning_rate", args.lr),
            ("seed", args.seed),
            ("log_every", args.log_every),
            ("checkpoint_every", args.checkpoint_every),
            ("knn", args.knn),
            ("n_box", args.n_box),
            ("grad_clip", args.grad_clip),
            ("features", args.features),
            ("two_step_mode", args.two_step),
        ]
        if value is not None
    }
    return replace(config, **overrides)


def cmd_fit(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = fit_run(config)
    out = Path(result.output_dir)

    mesh = _load_normalized(config.mesh)
    field = extract_field(result.angle, mesh)
    export_field(field, mesh, out / "field.rosy")
    report = singularities(field, mesh)
    _write_json(out / "singularities.json", _singularity_dict(report, mesh))

    RunManifest(
        subcommand="fit",
        argv=list(args.argv_record),
        config="config.json",
        mesh=config.mesh,
        output_dir=str(out),
        seed=config.seed,
        two_step_mode=config.two_step_mode,
    ).save(out / "manifest.json")
    print(out)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    mesh = _load_normalized(args.mesh)
    _, angle, _ = load_models(args.checkpoint)
    field = extract_field(angle, mesh)
    data = _singularity_dict(singularities(field, mesh), mesh)
    if args.oracle:
        stats = alignment_error(field, mesh, named_oracle(args.oracle))
        data["alignment"] = {
            "oracle": args.oracle,
            "median_deg": float(np.degrees(stats.median)),
            "mean_deg": float(np.degrees(stats.mean)),
            "max_deg": float(np.degrees(stats.max)),
            "n_valid": int(stats.n_valid),
            "n_excluded": int(stats.n_excluded),
        }
    text = json.dumps(data, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_export_field(args: argparse.Namespace) -> int:
    mesh = _load_normalized(args.mesh)
    _, angle, _ = load_models(args.checkpoint)
    export_field(extract_field(angle, mesh), mesh, args.out)
    print(args.out)
    return 0


def cmd_eval_quad(args: argparse.Namespace) -> int:
    quad = load_quad_obj(args.quads)
    reference = load_obj(args.reference)
    report = evaluate_quad(
        quad, reference, n_samples=args.samples, seed=args.seed
    )
    text = json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
    print(text)
    if args.out:
        report.save(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossfield",
        description="Fit a signed-distance model and a cross field to a "
        "triangle mesh, then analyze or score the results.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    fit = sub.add_parser("fit", help="train models on a mesh")
    fit.add_argument("--mesh", help="input triangle OBJ")
    fit.add_argument("--config", help="JSON config file; flags override it")
    fit.add_argument("--out", help="output run directory")
    fit.add_argument("--iters", type=int, help="iterations per phase")
    fit.add_argument("--lr", type=float, help="learning rate")
    fit.add_argument("--seed", type=int, help="random seed")
    fit.add_argument("--log-every", type=int, help="history row interval")
    fit.add_argument(
        "--checkpoint-every", type=int, help="checkpoint interval"
    )
    fit.add_argument("--knn", type=int, help="neighbor count for offsets")
    fit.add_argument("--n-box", type=int, help="box sample count")
    fit.add_argument("--grad-clip", type=float, help="gradient norm cap")
    fit.add_argument("--features", help="feature-line JSON file")
    fit.add_argument(
        "--two-step",
        action=argparse.BooleanOptionalAction,
        help="fit the distance model first, then the field",
    )
    fit.set_defaults(run=cmd_fit)

    analyze = sub.add_parser("analyze", help="report singularities as JSON")
    analyze.add_argument("--checkpoint", required=True, help="model file")
    analyze.add_argument("--mesh", required=True, help="triangle OBJ")
    analyze.add_argument(
        "--oracle",
        choices=("torus", "cylinder", "sphere"),
        help="also report alignment against this analytic direction field",
    )
    analyze.add_argument("--out", help="also write the JSON here")
    analyze.set_defaults(run=cmd_analyze)

    export = sub.add_parser("export-field", help="write the field as ROSY")
    export.add_argument("--checkpoint", required=True, help="model file")
    export.add_argument("--mesh", required=True, help="triangle OBJ")
    export.add_argument("--out", required=True, help="output ROSY path")
    export.set_defaults(run=cmd_export_field)

    evalq = sub.add_parser("eval-quad", help="score a quad mesh as JSON")
    evalq.add_argument("--quads", required=True, help="quad OBJ to score")
    evalq.add_argument(
        "--reference", required=True, help="reference triangle OBJ"
    )
    evalq.add_argument(
        "--samples", type=int, default=100_000, help="chamfer sample count"
    )
    evalq.add_argument("--seed", type=int, default=0, help="chamfer seed")
    evalq.add_argument("--out", help="also write the JSON here")
    evalq.set_defaults(run=cmd_eval_quad)

    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    threads = os.environ.get(THREAD_ENV)
    if threads:
        try:
            torch.set_num_threads(int(threads))
        except ValueError:
            print(
                f"error: {THREAD_ENV} must be an integer, got {threads!r}",
                file=sys.stderr,
            )
            return 2
    args = build_parser().parse_args(argv)
    args.argv_record = list(argv)
    try:
        return args.run(args)
    except (OSError, ValueError, TrainingDiverged) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
