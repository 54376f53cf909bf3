from dataclasses import replace
from pathlib import Path

import click
from flask import Blueprint, current_app

from app.commands import experiment_options, prepare_run, reports_errors
from app.depth_aug.pgm import (
    MAXVAL,
    read_pgm,
    read_pgm_header,
    write_histogram_csv,
    write_pgm,
)
from app.depth_aug.services import histogram, real_pipeline, sim_pipeline

depth_aug = Blueprint("depth_aug", __name__, cli_group=None)


@depth_aug.cli.command("depth")
@click.argument(
    "input_path", metavar="INPUT", type=click.Path(exists=True, dir_okay=False)
)
@click.option(
    "--mode",
    type=click.Choice(["sim", "real"]),
    default="sim",
    show_default=True,
    help="sim adds sensor artifacts; real fills and clips a captured frame.",
)
@experiment_options
@reports_errors
def depth_command(input_path, mode, config_path, seed, out_dir, overrides):
    """Augment a 16-bit depth image and write its histogram."""
    run = prepare_run(config_path, seed, out_dir, overrides)
    cfg = replace(run.experiment.augmentation, seed=run.seed)
    img = read_pgm(input_path)

    if mode == "sim":
        dataset = None if cfg.dataset_image is None else read_pgm(cfg.dataset_image)
        out = sim_pipeline(img, cfg, dataset=dataset)
    else:
        out = real_pipeline(img, cfg.clip_distance)

    # Keep the input quantization when it covers the output range
    scale, _ = read_pgm_header(input_path)
    if scale is not None and out.max_depth / scale > MAXVAL:
        scale = None

    stem = Path(input_path).stem
    write_pgm(out, run.out_dir / f"{stem}_{mode}.pgm", scale=scale)
    write_histogram_csv(
        histogram(out, cfg.histogram_bins),
        run.out_dir / f"{stem}_{mode}_hist.csv",
        float_format=current_app.config["CSV_FLOAT_FORMAT"],
    )
    click.echo(f"mode={mode} max_depth={out.max_depth:g}")
