import click
import numpy as np
from flask import Blueprint

from app.commands import experiment_options, prepare_run, reports_errors, write_csv
from app.dagger.hybrid import run_hybrid_comparison
from app.dagger.models import LinearPolicy, ProportionalExpert, ToyTask
from app.dagger.services import compare_training_modes, dagger_train

dagger = Blueprint("dagger", __name__, cli_group=None)

DAGGER_COLUMNS = ("epoch", "p", "buffer_size", "probe_loss", "rollout_return")


def metric_rows(metrics):
    return [
        (m.epoch, m.p, m.buffer_size, m.probe_loss, m.rollout_return)
        for m in metrics
    ]


def trace_rows(trace):
    return [
        (step, *commanded, *reached, deviation)
        for step, (commanded, reached, deviation) in enumerate(
            zip(trace.commanded, trace.reached, trace.deviation)
        )
    ]


def trace_columns(commanded_prefix, n_joints):
    return (
        "step",
        *(f"{commanded_prefix}_q{i}" for i in range(n_joints)),
        *(f"real_q{i}" for i in range(n_joints)),
        "deviation_norm",
    )


@dagger.cli.command("dagger")
@click.option(
    "--compare",
    is_flag=True,
    help="Also train behavior-cloning and student-only baselines on the same seed.",
)
@experiment_options
@reports_errors
def dagger_command(compare, config_path, seed, out_dir, overrides):
    """Train a linear student on the point-mass task with DAgger."""
    run = prepare_run(config_path, seed, out_dir, overrides)
    cfg = run.experiment.dagger
    env = ToyTask()
    expert = ProportionalExpert()
    student = LinearPolicy(env.obs_dim, env.action_dim)
    _, metrics, scheduler = dagger_train(env, expert, student, cfg, run.seed)

    write_csv(run.out_dir / "dagger.csv", DAGGER_COLUMNS, metric_rows(metrics))
    final_loss = metrics[-1].probe_loss if metrics else float("nan")
    click.echo(f"epochs={len(metrics)} p={scheduler.p:.6g} probe_loss={final_loss:.6g}")

    if compare:
        results = compare_training_modes(
            env,
            expert,
            lambda: LinearPolicy(env.obs_dim, env.action_dim),
            cfg,
            run.seed,
        )
        write_csv(
            run.out_dir / "dagger_compare.csv",
            ("mode", *DAGGER_COLUMNS),
            [
                (mode, *row)
                for mode, mode_metrics in results.items()
                for row in metric_rows(mode_metrics)
            ],
        )
        for mode, mode_metrics in results.items():
            if mode_metrics:
                click.echo(
                    f"{mode}: probe_loss={mode_metrics[-1].probe_loss:.6g} "
                    f"mean_return={np.mean([m.rollout_return for m in mode_metrics]):.6g}"
                )


@dagger.cli.command("hybrid")
@experiment_options
@reports_errors
def hybrid_command(config_path, seed, out_dir, overrides):
    """Compare hybrid sim-in-the-loop control against direct joint commands."""
    run = prepare_run(config_path, seed, out_dir, overrides)
    cfg = run.experiment.hybrid
    hybrid, naive = run_hybrid_comparison(cfg, run.seed)

    write_csv(
        run.out_dir / "hybrid.csv",
        trace_columns("sim", cfg.n_joints),
        trace_rows(hybrid),
    )
    write_csv(
        run.out_dir / "hybrid_naive.csv",
        trace_columns("target", cfg.n_joints),
        trace_rows(naive),
    )
    if cfg.steps:
        click.echo(
            f"hybrid_deviation={hybrid.deviation[-1]:.6g} "
            f"naive_deviation={naive.deviation[-1]:.6g}"
        )
    else:
        click.echo("steps=0")
