import click
from flask import Blueprint, current_app

from app.commands import experiment_options, prepare_run, reports_errors, write_csv
from app.rewards.rollouts import load_rollout
from app.rewards.services import evaluate_rollout
from app.trajectory.services import load_trajectory

rewards = Blueprint("rewards", __name__, cli_group=None)

REWARD_COLUMNS = (
    "step",
    "r_chain",
    "r_obj",
    "r_penalty",
    "total",
    "n_contact",
    "terminated",
)


@rewards.cli.command("reward-eval")
@click.argument("trajectory", type=click.Path(exists=True, dir_okay=False))
@click.argument("rollout", type=click.Path(exists=True, dir_okay=False))
@experiment_options
@reports_errors
def reward_eval_command(trajectory, rollout, config_path, seed, out_dir, overrides):
    """Score a rollout log against a reference trajectory, one row per step."""
    run = prepare_run(config_path, seed, out_dir, overrides)
    traj = load_trajectory(trajectory)
    steps = load_rollout(rollout)
    current_app.logger.info(
        f"Scoring {len(steps)} rollout steps against {len(traj)} reference frames"
    )

    results = evaluate_rollout(traj, steps, run.experiment.reward)
    write_csv(
        run.out_dir / "rewards.csv",
        REWARD_COLUMNS,
        [
            (
                r.step,
                r.r_chain,
                r.r_obj,
                r.r_penalty,
                r.total,
                r.n_contact,
                r.terminated,
            )
            for r in results
        ],
    )
    terminated = bool(results) and results[-1].terminated
    click.echo(f"steps={len(results)} terminated={str(terminated).lower()}")
