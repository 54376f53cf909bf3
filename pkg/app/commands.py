import csv
import functools
from dataclasses import dataclass
from pathlib import Path

import click
from flask import current_app

from app.errors import ToolkitError
from app.models import ExperimentConfig, load_experiment


@dataclass(frozen=True)
class Run:
    """Resolved settings for one command invocation."""

    experiment: ExperimentConfig
    seed: int
    out_dir: Path


def experiment_options(f):
    """Adds the global --config/--seed/--out/--override flags to a command."""
    f = click.option(
        "--override",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a config value, e.g. servo.max_steps=50. Repeatable.",
    )(f)
    f = click.option(
        "--out", "out_dir", type=click.Path(file_okay=False), help="Output directory."
    )(f)
    f = click.option("--seed", type=int, help="Seed for every random draw.")(f)
    f = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        help="Experiment TOML file.",
    )(f)
    return f


def reports_errors(f):
    """Turns toolkit errors into a clean CLI failure; logs anything unexpected."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ToolkitError as e:
            raise click.ClickException(str(e))
        except click.ClickException:
            raise
        except Exception as e:
            current_app.logger.error(f"Command failed: {e}")
            raise

    return wrapper


def prepare_run(config_path, seed, out_dir, overrides) -> Run:
    if config_path is None:
        default = Path(current_app.config["EXPERIMENT_FILE"])
        config_path = default if default.is_file() else None
    experiment = load_experiment(config_path, overrides)

    if seed is None:
        seed = experiment.seed
    if seed is None:
        seed = current_app.config["DEFAULT_SEED"]
    out = Path(out_dir or experiment.output_dir or current_app.config["OUTPUT_DIR"])
    out.mkdir(parents=True, exist_ok=True)
    current_app.logger.info(f"Seed {seed}, writing artifacts to {out}")
    return Run(experiment=experiment, seed=seed, out_dir=out)


def format_value(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, current_app.config["CSV_FLOAT_FORMAT"])
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    current_app.logger.info(f"Wrote {path}")
    return path
