import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from itertools import repeat

import click
import numpy as np
from flask import Blueprint, current_app

from app.commands import experiment_options, prepare_run, reports_errors, write_csv
from app.errors import MatcherFailure
from app.pnp_servo.controller import open_loop_correction, servo_loop
from app.simworld.services import generate_field, sample_start
from app.simworld.world import SimulatedBase

logger = logging.getLogger(__name__)

pnp_servo = Blueprint("pnp_servo", __name__, cli_group=None)

SERVO_COLUMNS = (
    "cycle",
    "n_matches",
    "n_inliers",
    "reproj_error_px",
    "e_x",
    "e_y",
    "e_yaw",
    "active_axis",
    "v_x",
    "v_y",
    "v_yaw",
    "gt_dist_error_m",
    "gt_ori_error_rad",
)
TRIAL_COLUMNS = (
    "trial",
    "seed",
    "mode",
    "start_dx",
    "start_dy",
    "start_dyaw",
    "converged",
    "steps",
    "gt_dist_error_m",
    "gt_ori_error_rad",
)
SUMMARY_COLUMNS = (
    "mode",
    "trials",
    "converged",
    "mean_dist_error_m",
    "std_dist_error_m",
    "mean_ori_error_rad",
    "std_ori_error_rad",
)
MODES = ("closed", "simultaneous", "open")


def build_world(experiment, seed):
    """Seeded simulated base at a sampled start offset from the scenario goal."""
    start_seed, world_seed = np.random.SeedSequence(seed).spawn(2)
    scenario = experiment.scenario
    start, offset = sample_start(scenario, start_seed)
    world = SimulatedBase(
        experiment.world,
        start,
        scenario.goal_state,
        extrinsic=experiment.servo.extrinsic,
        field=generate_field(experiment.world, seed=scenario.field_seed),
        seed=world_seed,
    )
    return world, offset


def gt_converged(dist, ori, cfg):
    return dist <= float(np.hypot(cfg.eps_x, cfg.eps_y)) and ori <= cfg.eps_yaw


def run_closed_loop(experiment, trial, seed, mode):
    """One closed-loop row; mode "simultaneous" drives every axis each cycle."""
    cfg = experiment.servo
    if mode == "simultaneous":
        cfg = replace(cfg, sequential=False)
    world, offset = build_world(experiment, seed)
    try:
        outcome = servo_loop(world, experiment.scenario.goal_state, cfg, seed=seed)
        converged, steps = outcome.converged, outcome.steps
    except MatcherFailure as e:
        logger.warning(f"Trial {trial} ({mode}) stopped after {e.steps} steps: {e}")
        converged, steps = False, e.steps
    dist, ori = world.ground_truth_error()
    logger.debug(
        f"Trial {trial} ({mode}): steering={world.steering:.4f} rad "
        f"coupling={world.coupling_travel:.4f} m"
    )
    return (trial, seed, mode, *offset, converged, steps, dist, ori)


def run_trial(experiment, trial, seed, simultaneous=False):
    """Rows for one trial; every mode starts from the same sampled pose."""
    cfg = experiment.servo
    goal = experiment.scenario.goal_state
    rows = [run_closed_loop(experiment, trial, seed, "closed")]
    if simultaneous:
        rows.append(run_closed_loop(experiment, trial, seed, "simultaneous"))

    world, offset = build_world(experiment, seed)
    open_loop_correction(world, goal, cfg, seed=seed)
    dist, ori = world.ground_truth_error()
    steps = max(1, round(cfg.open_loop_duration / cfg.dt))
    converged = gt_converged(dist, ori, cfg)
    rows.append((trial, seed, "open", *offset, converged, steps, dist, ori))
    return rows


def summarize(rows):
    summary = []
    for mode in MODES:
        selected = [row for row in rows if row[2] == mode]
        if not selected:
            continue
        dist = np.array([row[8] for row in selected])
        ori = np.array([row[9] for row in selected])
        summary.append(
            (
                mode,
                len(selected),
                sum(1 for row in selected if row[6]),
                float(dist.mean()),
                float(dist.std()),
                float(ori.mean()),
                float(ori.std()),
            )
        )
    return summary


@pnp_servo.cli.command("servo")
@experiment_options
@reports_errors
def servo_command(config_path, seed, out_dir, overrides):
    """Run one closed-loop servo episode in the simulated world."""
    run = prepare_run(config_path, seed, out_dir, overrides)
    experiment = run.experiment
    world, offset = build_world(experiment, run.seed)
    current_app.logger.info(f"Start offset {offset}")

    rows = []

    def record(cycle):
        dist, ori = world.ground_truth_error()
        rows.append(
            (
                cycle.cycle,
                cycle.n_matches,
                cycle.n_inliers,
                cycle.reproj_error_px,
                *cycle.error.as_array(),
                cycle.active_axis,
                *cycle.command,
                dist,
                ori,
            )
        )

    outcome = servo_loop(
        world,
        experiment.scenario.goal_state,
        experiment.servo,
        seed=run.seed,
        on_cycle=record,
    )
    write_csv(run.out_dir / "servo.csv", SERVO_COLUMNS, rows)

    dist, ori = world.ground_truth_error()
    fmt = current_app.config["CSV_FLOAT_FORMAT"]
    click.echo(
        f"converged={str(outcome.converged).lower()} steps={outcome.steps} "
        f"gt_dist_error={dist:{fmt}} gt_ori_error={ori:{fmt}}"
    )


@pnp_servo.cli.command("sweep")
@click.option("--trials", type=click.IntRange(min=1), default=100, show_default=True)
@click.option(
    "--simultaneous",
    is_flag=True,
    help="Also run each trial with every axis driven at once.",
)
@experiment_options
@reports_errors
def sweep_command(trials, simultaneous, config_path, seed, out_dir, overrides):
    """Run closed-loop and open-loop trials over sampled start offsets."""
    run = prepare_run(config_path, seed, out_dir, overrides)
    seeds = [
        int(child.generate_state(1)[0])
        for child in np.random.SeedSequence(run.seed).spawn(trials)
    ]
    workers = current_app.config["SWEEP_WORKERS"]
    current_app.logger.info(f"Sweeping {trials} trials on {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    run_trial,
                    repeat(run.experiment),
                    range(trials),
                    seeds,
                    repeat(simultaneous),
                )
            )
    else:
        results = [
            run_trial(run.experiment, i, s, simultaneous) for i, s in enumerate(seeds)
        ]

    rows = [row for trial_rows in results for row in trial_rows]
    rows.sort(key=lambda row: (row[0], MODES.index(row[2])))
    summary = summarize(rows)
    write_csv(run.out_dir / "sweep_trials.csv", TRIAL_COLUMNS, rows)
    write_csv(run.out_dir / "sweep_summary.csv", SUMMARY_COLUMNS, summary)
    for mode, n, converged, mean_dist, _, mean_ori, _ in summary:
        click.echo(
            f"{mode}: converged={converged}/{n} mean_dist_error={mean_dist:.4g} "
            f"mean_ori_error={mean_ori:.4g}"
        )
