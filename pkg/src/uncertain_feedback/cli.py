"""Command line front door: run experiment grids, summarize, replay, serve."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import harness


@click.group()
def main():
    """Learning-from-uncertain-feedback experiment lab."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="Grid JSON file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Directory for episodes.csv and summary.csv.")
@click.option("--workers", default=1, show_default=True, help="Parallel episode workers.")
@click.option("--master-seed", default=None, type=int, help="Override the grid's master seed.")
def run(config_path, out_dir, workers, master_seed):
    """Run every cell x seed of a grid config and write CSV results."""
    with open(config_path) as fh:
        grid_dict = json.load(fh)
    if master_seed is not None:
        grid_dict["master_seed"] = master_seed
    grid = harness.ExperimentGrid.from_dict(grid_dict)
    rows = harness.run_grid(grid, out_dir, workers=workers)
    click.echo(f"wrote {len(rows)} episodes across {len(grid.cells)} cells to {out_dir}")


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True), help="Episode JSONL log.")
def replay(log_path):
    """Re-drive a logged episode through the library and check the traces."""
    result = harness.replay_episode_log(log_path)
    click.echo(f"final policy: {result.final_policy}")
    if result.sigma_trace is not None:
        click.echo(f"sigma trace: {len(result.sigma_trace)} entries, final {result.sigma_trace[-1]:.5f}")
    click.echo(f"action mismatches: {result.action_mismatches}")
    if result.policy_matches is not None:
        click.echo(f"policy matches log: {result.policy_matches}")
    if result.sigma_matches is not None:
        click.echo(f"sigma trace matches log: {result.sigma_matches}")


@main.command()
@click.argument("results_dir", type=click.Path(exists=True))
def summarize(results_dir):
    """Recompute summary.csv from an episodes.csv results directory."""
    rows = harness.read_episode_rows(Path(results_dir) / "episodes.csv")
    summary = harness.write_summary(rows, Path(results_dir) / "summary.csv")
    for entry in summary:
        click.echo(
            f"{entry['cell_id']:58s} {entry['metric']:14s} "
            f"mean={entry['mean']:10.4f} std={entry['std']:9.4f} n={entry['count']}"
        )


@main.command("make-grid")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Where to write the grid JSON.")
@click.option("--seeds", default=100, show_default=True, help="Seeds per cell.")
@click.option("--master-seed", default=0, show_default=True)
def make_grid(out_path, seeds, master_seed):
    """Write the default synthetic benchmark grid as a config file."""
    grid = harness.default_grid(seeds_per_cell=seeds, master_seed=master_seed)
    with open(out_path, "w") as fh:
        json.dump(grid.to_dict(), fh, indent=2)
    click.echo(f"wrote {len(grid.cells)}-cell grid to {out_path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--log-dir", default="episode_logs", show_default=True, help="Where finished sessions are logged.")
@click.option("--ui", "ui_dir", default=None, type=click.Path(exists=True), help="Static UI bundle to serve at /.")
def serve(host, port, log_dir, ui_dir):
    """Start the interactive training service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(log_dir=log_dir, ui_dir=ui_dir), host=host, port=port)


if __name__ == "__main__":
    main()
