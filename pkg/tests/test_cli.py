import csv
import json
import math

import numpy as np
import pytest

from app.dagger.commands import DAGGER_COLUMNS, trace_columns
from app.depth_aug.pgm import read_pgm, write_pgm
from app.geometry import CameraIntrinsics
from app.pnp_servo.commands import SERVO_COLUMNS, SUMMARY_COLUMNS, TRIAL_COLUMNS
from app.rewards.commands import REWARD_COLUMNS
from app.rewards.models import ContactSet
from app.rewards.rollouts import step_record
from app.simworld.scenes import render_tabletop_scene
from app.trajectory.services import save_trajectory


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def invoke(runner, *args):
    return runner.invoke(args=[str(a) for a in args])


def test_app_serves_no_http_routes(app):
    rules = [rule.rule for rule in app.url_map.iter_rules() if rule.endpoint != "static"]
    assert rules == []
    assert app.test_client().get("/health").status_code == 404


def test_servo_writes_cycle_log(runner, tmp_path):
    result = invoke(runner, "servo", "--seed", 3, "--out", tmp_path)
    assert result.exit_code == 0, result.output
    assert "converged=" in result.output

    rows = read_rows(tmp_path / "servo.csv")
    assert tuple(rows[0]) == SERVO_COLUMNS
    assert len(rows) > 1
    assert rows[-1][SERVO_COLUMNS.index("active_axis")] in ("x", "y", "yaw", "done")


def test_servo_is_reproducible(runner, tmp_path):
    for name in ("a", "b", "c"):
        seed = 1 if name == "c" else 0
        result = invoke(runner, "servo", "--seed", seed, "--out", tmp_path / name)
        assert result.exit_code == 0, result.output
    first = (tmp_path / "a" / "servo.csv").read_text()
    assert first == (tmp_path / "b" / "servo.csv").read_text()
    assert first != (tmp_path / "c" / "servo.csv").read_text()


def test_servo_budget_override(runner, tmp_path):
    result = invoke(
        runner, "servo", "--out", tmp_path, "--override", "servo.max_steps=1"
    )
    assert result.exit_code == 0, result.output
    assert "converged=false steps=1" in result.output


def test_bad_override_fails_cleanly(runner, tmp_path):
    result = invoke(runner, "servo", "--out", tmp_path, "--override", "servo.bogus=1")
    assert result.exit_code == 1
    assert "unknown key 'servo.bogus'" in result.output


def test_sweep_outputs(runner, tmp_path):
    result = invoke(runner, "sweep", "--trials", 2, "--seed", 5, "--out", tmp_path)
    assert result.exit_code == 0, result.output

    trials = read_rows(tmp_path / "sweep_trials.csv")
    assert tuple(trials[0]) == TRIAL_COLUMNS
    assert [(row[0], row[2]) for row in trials[1:]] == [
        ("0", "closed"),
        ("0", "open"),
        ("1", "closed"),
        ("1", "open"),
    ]
    assert {row[6] for row in trials[1:]} <= {"true", "false"}

    summary = read_rows(tmp_path / "sweep_summary.csv")
    assert tuple(summary[0]) == SUMMARY_COLUMNS
    assert [row[0] for row in summary[1:]] == ["closed", "open"]
    assert "closed: converged=" in result.output


def test_sweep_simultaneous_mode(runner, tmp_path):
    result = invoke(
        runner, "sweep", "--trials", 2, "--simultaneous", "--seed", 5, "--out", tmp_path
    )
    assert result.exit_code == 0, result.output

    trials = read_rows(tmp_path / "sweep_trials.csv")[1:]
    assert [row[2] for row in trials] == ["closed", "simultaneous", "open"] * 2
    for trial in ("0", "1"):
        offsets = {tuple(row[3:6]) for row in trials if row[0] == trial}
        assert len(offsets) == 1

    summary = read_rows(tmp_path / "sweep_summary.csv")[1:]
    assert [row[0] for row in summary] == ["closed", "simultaneous", "open"]
    assert "simultaneous: converged=" in result.output


def test_sweep_rejects_zero_trials(runner, tmp_path):
    result = invoke(runner, "sweep", "--trials", 0, "--out", tmp_path)
    assert result.exit_code == 2


@pytest.mark.slow
def test_closed_loop_beats_open_loop(runner, tmp_path):
    result = invoke(runner, "sweep", "--trials", 100, "--seed", 0, "--out", tmp_path)
    assert result.exit_code == 0, result.output
    summary = {row[0]: row for row in read_rows(tmp_path / "sweep_summary.csv")[1:]}
    mean = SUMMARY_COLUMNS.index("mean_dist_error_m")
    assert float(summary["open"][mean]) >= 3 * float(summary["closed"][mean])


def _write_reward_inputs(tmp_path, traj, pairs=(("left_thumb", "box"),)):
    traj_path = tmp_path / "reference.traj"
    save_trajectory(traj, traj_path)
    rollout_path = tmp_path / "rollout.jsonl"
    contacts = ContactSet(frozenset(pairs))
    with open(rollout_path, "w") as f:
        for step, frame in enumerate(traj.frames[:3]):
            record = step_record(
                step,
                {"box": frame.object_pose("box")},
                frame.left_hand.keypoints,
                frame.right_hand.keypoints,
                contacts,
                [1.0, -1.0],
                [0.2, 0.3],
            )
            f.write(json.dumps(record) + "\n")
    return traj_path, rollout_path


def test_reward_eval(runner, tmp_path, make_trajectory):
    traj_path, rollout_path = _write_reward_inputs(tmp_path, make_trajectory())
    result = invoke(
        runner, "reward-eval", traj_path, rollout_path, "--out", tmp_path / "out"
    )
    assert result.exit_code == 0, result.output
    assert "steps=3 terminated=false" in result.output

    rows = read_rows(tmp_path / "out" / "rewards.csv")
    assert tuple(rows[0]) == REWARD_COLUMNS
    assert len(rows) == 4
    assert all(row[REWARD_COLUMNS.index("n_contact")] == "1" for row in rows[1:])
    assert float(rows[1][REWARD_COLUMNS.index("r_obj")]) == pytest.approx(1.0)


def test_reward_eval_of_matching_rollout(runner, tmp_path, make_trajectory):
    pairs = (("left_thumb", "box"), ("right_palm", "box"))
    traj_path, rollout_path = _write_reward_inputs(tmp_path, make_trajectory(), pairs)
    result = invoke(
        runner, "reward-eval", traj_path, rollout_path, "--out", tmp_path / "out"
    )
    assert result.exit_code == 0, result.output

    rows = read_rows(tmp_path / "out" / "rewards.csv")[1:]
    column = {name: i for i, name in enumerate(REWARD_COLUMNS)}
    for row in rows:
        r_chain, r_obj, r_penalty, total = (
            float(row[column[name]])
            for name in ("r_chain", "r_obj", "r_penalty", "total")
        )
        assert row[column["n_contact"]] == "2"
        assert r_chain == pytest.approx(1.0, abs=1e-12)
        assert r_penalty == pytest.approx(-0.001 * (1.0 * 0.2 + 1.0 * 0.3))
        assert total == pytest.approx(r_chain + r_obj + r_penalty, rel=1e-9)


def test_reward_eval_unknown_object(runner, tmp_path, make_trajectory):
    traj_path, rollout_path = _write_reward_inputs(tmp_path, make_trajectory())
    result = invoke(
        runner,
        "reward-eval",
        traj_path,
        rollout_path,
        "--out",
        tmp_path,
        "--override",
        "reward.target_object=cup",
    )
    assert result.exit_code == 1
    assert "target_object" in result.output


def test_reward_eval_missing_input(runner, tmp_path):
    result = invoke(runner, "reward-eval", tmp_path / "a.traj", tmp_path / "b.jsonl")
    assert result.exit_code == 2


@pytest.fixture
def depth_frame(tmp_path):
    k = CameraIntrinsics(40.0, 40.0, 16.0, 16.0)
    path = tmp_path / "frame.pgm"
    write_pgm(render_tabletop_scene(k, 32, seed=0), path)
    return path


@pytest.mark.parametrize("mode", ["sim", "real"])
def test_depth_writes_image_and_histogram(runner, tmp_path, depth_frame, mode):
    out = tmp_path / "out"
    result = invoke(runner, "depth", depth_frame, "--mode", mode, "--out", out)
    assert result.exit_code == 0, result.output
    assert f"mode={mode} max_depth=1" in result.output

    img = read_pgm(out / f"frame_{mode}.pgm")
    assert img.shape == (32, 32)
    assert img.max_depth == 1.0
    assert img.values.max() <= 1.0

    hist = read_rows(out / f"frame_{mode}_hist.csv")
    assert len(hist) == 51
    total = sum(float(row[1]) for row in hist[1:])
    assert total == pytest.approx(1.0)


def test_depth_is_seeded(runner, tmp_path, depth_frame):
    for name in ("a", "b"):
        out = tmp_path / name
        result = invoke(runner, "depth", depth_frame, "--seed", 4, "--out", out)
        assert result.exit_code == 0, result.output
    a = read_pgm(tmp_path / "a" / "frame_sim.pgm").values
    b = read_pgm(tmp_path / "b" / "frame_sim.pgm").values
    np.testing.assert_array_equal(a, b)
    for name in ("frame_sim.pgm", "frame_sim_hist.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()


def test_depth_rejects_bad_clip_distance(runner, tmp_path, depth_frame):
    result = invoke(
        runner,
        "depth",
        depth_frame,
        "--out",
        tmp_path,
        "--override",
        "augmentation.clip_distance=2.0",
    )
    assert result.exit_code == 1
    assert "[augmentation]" in result.output


def test_dagger_command(runner, tmp_path):
    result = invoke(
        runner, "dagger", "--out", tmp_path, "--override", "dagger.epochs=3"
    )
    assert result.exit_code == 0, result.output
    assert "epochs=3 " in result.output

    rows = read_rows(tmp_path / "dagger.csv")
    assert tuple(rows[0]) == DAGGER_COLUMNS
    assert [row[0] for row in rows[1:]] == ["0", "1", "2"]


def test_dagger_command_without_epochs(runner, tmp_path):
    result = invoke(
        runner, "dagger", "--out", tmp_path, "--override", "dagger.epochs=0"
    )
    assert result.exit_code == 0, result.output
    assert "epochs=0 p=1 probe_loss=nan" in result.output
    assert len(read_rows(tmp_path / "dagger.csv")) == 1


def test_hybrid_command(runner, tmp_path):
    result = invoke(runner, "hybrid", "--seed", 2, "--out", tmp_path)
    assert result.exit_code == 0, result.output

    hybrid = read_rows(tmp_path / "hybrid.csv")
    naive = read_rows(tmp_path / "hybrid_naive.csv")
    assert tuple(hybrid[0]) == trace_columns("sim", 6)
    assert tuple(naive[0]) == trace_columns("target", 6)
    assert len(hybrid) == len(naive) == 31

    values = dict(part.split("=") for part in result.output.split())
    assert float(values["hybrid_deviation"]) < float(values["naive_deviation"])
    deviation = float(hybrid[-1][-1])
    assert math.isclose(deviation, float(values["hybrid_deviation"]), rel_tol=1e-5)


def test_hybrid_command_without_steps(runner, tmp_path):
    result = invoke(
        runner, "hybrid", "--out", tmp_path, "--override", "hybrid.steps=0"
    )
    assert result.exit_code == 0, result.output
    assert result.output.strip() == "steps=0"
    assert len(read_rows(tmp_path / "hybrid.csv")) == 1


def test_hybrid_command_with_mirrored_dynamics(runner, tmp_path):
    result = invoke(
        runner, "hybrid", "--out", tmp_path, "--override", "hybrid.tau_real=0.05"
    )
    assert result.exit_code == 0, result.output
    rows = read_rows(tmp_path / "hybrid.csv")[1:]
    assert max(abs(float(row[-1])) for row in rows) <= 1e-12


def test_dagger_command_compares_training_modes(runner, tmp_path):
    result = invoke(
        runner,
        "dagger",
        "--compare",
        "--out",
        tmp_path,
        "--override",
        "dagger.epochs=3",
    )
    assert result.exit_code == 0, result.output
    for mode in ("dagger", "behavior_cloning", "student_only"):
        assert f"{mode}: probe_loss=" in result.output

    rows = read_rows(tmp_path / "dagger_compare.csv")
    assert tuple(rows[0]) == ("mode", *DAGGER_COLUMNS)
    assert [row[0] for row in rows[1:]] == (
        ["dagger"] * 3 + ["behavior_cloning"] * 3 + ["student_only"] * 3
    )
    p = DAGGER_COLUMNS.index("p") + 1
    assert {row[p] for row in rows[1:] if row[0] == "behavior_cloning"} == {"1"}
    assert {row[p] for row in rows[1:] if row[0] == "student_only"} == {"0"}


@pytest.mark.parametrize(
    "args, outputs",
    [
        (
            ("sweep", "--trials", 2, "--simultaneous"),
            ("sweep_trials.csv", "sweep_summary.csv"),
        ),
        (
            ("dagger", "--compare", "--override", "dagger.epochs=3"),
            ("dagger.csv", "dagger_compare.csv"),
        ),
        (("hybrid",), ("hybrid.csv", "hybrid_naive.csv")),
        (("servo",), ("servo.csv",)),
    ],
)
def test_reruns_write_identical_files(runner, tmp_path, args, outputs):
    for name in ("a", "b"):
        result = invoke(runner, *args, "--seed", 9, "--out", tmp_path / name)
        assert result.exit_code == 0, result.output
    for output in outputs:
        assert (tmp_path / "a" / output).read_bytes() == (
            tmp_path / "b" / output
        ).read_bytes()


def test_reward_eval_reruns_write_identical_files(runner, tmp_path, make_trajectory):
    traj_path, rollout_path = _write_reward_inputs(tmp_path, make_trajectory())
    for name in ("a", "b"):
        result = invoke(
            runner, "reward-eval", traj_path, rollout_path, "--out", tmp_path / name
        )
        assert result.exit_code == 0, result.output
    a = (tmp_path / "a" / "rewards.csv").read_bytes()
    assert a == (tmp_path / "b" / "rewards.csv").read_bytes()
