"""Command-line entry points: scene synthesis, evaluation runs, ablation
sweeps, and the HTTP session service.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import metrics
from .model import ValidationError
from .sceneio import LoadedScene, SceneFormatError, SynthSpec, generate_synthetic, read_scene, write_scene
from .session import SessionConfig, open_session
from .simulate import StrategySpec, run_strategy

EXIT_USAGE = 1
EXIT_DATA = 2

_STRATEGY_ALIASES = {"iter": "iterative"}


@click.group()
def cli():
    """Interactive open-world point-cloud segmentation tools."""


@cli.command()
@click.option("--base", "base_count", type=int, default=6, show_default=True, help="Base class count.")
@click.option("--novel", "novel_count", type=int, default=2, show_default=True, help="Novel class count.")
@click.option("--points-per-class", type=int, default=200, show_default=True)
@click.option("--sep", "separation", type=float, default=8.0, show_default=True, help="Feature separation in noise units.")
@click.option("--dim", "feature_dim", type=int, default=16, show_default=True)
@click.option("--radius", type=float, default=0.3, show_default=True, help="Spatial blob radius (m).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, default=1, show_default=True, help="Number of scenes (seeds seed..seed+count-1).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output file, or directory when --count > 1.")
def synth(base_count, novel_count, points_per_class, separation, feature_dim, radius, seed, count, out_path):
    """Write seeded synthetic scene containers."""
    if points_per_class < 1 or base_count < 1 or novel_count < 0 or count < 1:
        raise click.UsageError("counts must be positive (novel may be 0)")
    if separation < 0 or radius <= 0 or feature_dim < 1:
        raise click.UsageError("bad geometry flags")

    def make(s: int) -> LoadedScene:
        return generate_synthetic(SynthSpec(
            base_class_count=base_count,
            novel_class_count=novel_count,
            points_per_class=points_per_class,
            feature_dim=feature_dim,
            feature_separation=separation,
            spatial_blob_radius=radius,
            seed=s,
        ))

    if count == 1:
        scene = make(seed)
        write_scene(out_path, scene.frame, scene.base_names, scene.novel_names)
        click.echo(f"wrote {out_path} (n={scene.frame.n})")
    else:
        out_dir = Path(out_path)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            scene = make(seed + i)
            path = out_dir / f"scene_{seed + i:04d}.hows"
            write_scene(path, scene.frame, scene.base_names, scene.novel_names)
        click.echo(f"wrote {count} scenes to {out_dir}")


def _evaluate(scene: LoadedScene, scene_name: str, strategy: str, budget: int,
              protos: int, seed: int) -> metrics.RunReport:
    config = SessionConfig(initial_prototypes=protos, seed=seed)
    t0 = time.perf_counter()
    state = open_session(scene.frame, config, base_names=scene.base_names)
    if budget > 0:
        spec = StrategySpec(kind=strategy, budget=budget)
        state, used = run_strategy(state, spec, scene.novel_names)
    else:
        used = 0  # budget 0: closed-world baseline, no clicks
    wall = time.perf_counter() - t0

    mapped = metrics.map_to_scene_labels(
        state.prediction.point_labels, state.label_space, scene.novel_names
    )
    tally = metrics.tally_from_labels(mapped, scene.frame.gt_labels, scene.frame.base_count)
    miou_b = metrics.miou(tally, "base")
    try:
        miou_n = metrics.miou(tally, "novel")
        hm = metrics.harmonic_mean(miou_b, miou_n)
    except ValueError:
        miou_n = None
        hm = None
    return metrics.RunReport(
        scene=scene_name,
        strategy=strategy,
        budget=budget,
        clicks_used=used,
        miou_b=miou_b,
        miou_n=miou_n,
        miou_a=metrics.miou(tally, "all"),
        hm=hm,
        wall_time=wall,
    )


@cli.command()
@click.argument("scene_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", type=click.Choice(["oncoc", "ococ", "iter", "ioncoc"]), default="ioncoc", show_default=True)
@click.option("--budget", type=int, default=20, show_default=True)
@click.option("--protos", type=int, default=30, show_default=True, help="Initial prototype count.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Also write the report here.")
def run(scene_path, strategy, budget, protos, seed, fmt, out_path):
    """Run one simulated-annotator evaluation on a scene container."""
    if budget < 1:
        raise click.UsageError("budget must be >= 1")
    if protos < 1:
        raise click.UsageError("protos must be >= 1")
    scene = read_scene(scene_path)
    if scene.frame.gt_labels is None:
        raise ValidationError("scene has no ground truth; simulated strategies need it")
    strategy = _STRATEGY_ALIASES.get(strategy, strategy)
    report = _evaluate(scene, Path(scene_path).name, strategy, budget, protos, seed)
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2)
    else:
        text = ",".join(str(report.to_dict()[c]) for c in metrics.REPORT_COLUMNS)
        text = ",".join(metrics.REPORT_COLUMNS) + "\n" + text
    click.echo(text)
    if out_path:
        Path(out_path).write_text(text + "\n")


@cli.command()
@click.argument("scene_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--budgets", default="0,5,10,20,30", show_default=True, help="Comma-separated click budgets.")
@click.option("--protos", default="10,30,50,70", show_default=True, help="Comma-separated prototype counts.")
@click.option("--strategy", type=click.Choice(["oncoc", "ococ", "iter", "ioncoc"]), default="ioncoc", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write aggregate CSV here.")
def ablate(scene_dir, budgets, protos, strategy, seed, out_path):
    """Sweep click budgets and prototype counts over a scene directory."""
    try:
        budget_grid = [int(b) for b in budgets.split(",") if b.strip() != ""]
        proto_grid = [int(p) for p in protos.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise click.UsageError(f"bad grid: {exc}") from exc
    if not budget_grid or not proto_grid:
        raise click.UsageError("empty sweep grid")
    if any(b < 0 for b in budget_grid) or any(p < 1 for p in proto_grid):
        raise click.UsageError("budgets must be >= 0, protos >= 1")

    paths = sorted(Path(scene_dir).glob("*.hows"))
    if not paths:
        raise ValidationError(f"no .hows scenes in {scene_dir}")
    scenes = [(p.name, read_scene(p)) for p in paths]
    strategy = _STRATEGY_ALIASES.get(strategy, strategy)

    header = "protos,budget,scenes,mean_miou_b,mean_miou_n,mean_miou_a,mean_hm,mean_clicks,mean_wall_time"
    lines = [header]
    for k in proto_grid:
        for budget in budget_grid:
            rows = [
                _evaluate(scene, name, strategy, budget, k, seed)
                for name, scene in scenes
            ]
            mean = lambda vals: float(np.mean([v for v in vals if v is not None])) if any(v is not None for v in vals) else float("nan")
            lines.append(
                f"{k},{budget},{len(rows)},"
                f"{mean([r.miou_b for r in rows]):.4f},"
                f"{mean([r.miou_n for r in rows]):.4f},"
                f"{mean([r.miou_a for r in rows]):.4f},"
                f"{mean([r.hm for r in rows]):.4f},"
                f"{mean([float(r.clicks_used) for r in rows]):.2f},"
                f"{mean([r.wall_time for r in rows]):.4f}"
            )
    table = "\n".join(lines)
    click.echo(table)
    if out_path:
        Path(out_path).write_text(table + "\n")


@cli.command()
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port, host):
    """Start the HTTP session service (HOWSEG_PORT overrides --port)."""
    import uvicorn

    from .service import create_app

    port = int(os.environ.get("HOWSEG_PORT", port))
    uvicorn.run(create_app(), host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    """Entry point with the stable exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # e.g. --help
        return int(exc.exit_code)
    except (click.UsageError, click.BadParameter) as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except (SceneFormatError, ValidationError, FileNotFoundError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
