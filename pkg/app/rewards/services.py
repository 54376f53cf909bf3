import numpy as np

from app.errors import ChainLengthMismatch, DimensionMismatch
from app.geometry import Pose, UnitQuaternion, quat_distance
from app.rewards.models import (
    HAND_PARTS,
    OBSERVATION_LAYOUT,
    ContactSet,
    DistanceChain,
    JointState,
    ReferenceState,
    ResidualBounds,
    RewardConfig,
    RobotState,
    StepReward,
)
from app.trajectory.models import HandKeypoints


def contact_count(contacts: ContactSet) -> int:
    objects = sorted({object_id for _, object_id in contacts.pairs})
    indicator = np.array(
        [[contacts.touching(part, obj) for obj in objects] for part in HAND_PARTS],
        dtype=int,
    ).reshape(len(HAND_PARTS), len(objects))
    return int(indicator.sum())


def chain_reward(
    current: DistanceChain, reference: DistanceChain, n_contact, cfg: RewardConfig
) -> float:
    if current.vectors.shape != reference.vectors.shape:
        raise ChainLengthMismatch(
            f"chains have {len(current.vectors)} and {len(reference.vectors)} vectors"
        )
    if n_contact < cfg.n_num:
        return 0.0
    deviation = np.linalg.norm(reference.vectors - current.vectors, axis=1)
    return float(np.exp(-deviation.mean()))


def object_tracking_reward(
    p, q: UnitQuaternion, p_ref, q_ref: UnitQuaternion, cfg: RewardConfig
) -> float:
    position_error = np.sum((np.asarray(p, float) - np.asarray(p_ref, float)) ** 2)
    angle = quat_distance(q, q_ref)
    return float(np.exp(-cfg.k1 * position_error - cfg.k2 * angle**2))


def power_penalty(js: JointState, cfg: RewardConfig) -> float:
    return -cfg.lam * float(np.sum(np.abs(js.forces * js.velocities)))


def total_reward(chain, obj, penalty, cfg: RewardConfig) -> float:
    return cfg.w_chain * chain + cfg.w_obj * obj + penalty


def compose_residual_action(a_g, delta, bounds: ResidualBounds) -> np.ndarray:
    """Adds the fine residual, scaled from [-1, 1] to bounds, to the coarse action."""
    a_g = np.asarray(a_g, dtype=float)
    delta = np.clip(np.asarray(delta, dtype=float), -1.0, 1.0)
    return a_g + delta * bounds.as_array()


def should_terminate_early(p_obj, p_ref, threshold) -> bool:
    error = np.linalg.norm(np.asarray(p_obj, float) - np.asarray(p_ref, float))
    return bool(error > threshold)


def distance_chain(
    object_pose: Pose, left_hand: HandKeypoints, right_hand: HandKeypoints
) -> DistanceChain:
    keypoints = np.vstack([left_hand.as_array(), right_hand.as_array()])
    return DistanceChain(keypoints - object_pose.position)


def contact_flags(contacts: ContactSet, objects) -> np.ndarray:
    """Part-major contact flags for the first two objects."""
    objects = list(objects)[:2]
    objects += [None] * (2 - len(objects))
    return np.array(
        [
            float(obj is not None and contacts.touching(part, obj))
            for part in HAND_PARTS
            for obj in objects
        ]
    )


def _block(name, values, size):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size != size:
        raise DimensionMismatch(f"expected {size} values, got {arr.size}", field=name)
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch("contains non-finite values", field=name)
    return arr


def build_observation(
    state: RobotState,
    reference: ReferenceState,
    current_chain: DistanceChain,
    reference_chain: DistanceChain,
    contacts,
    step,
    horizon,
) -> np.ndarray:
    """Concatenates the policy observation in OBSERVATION_LAYOUT order.

    contacts is either the 24 contact flags or a (ContactSet, objects) pair.
    The time field is step / horizon.
    """
    if isinstance(contacts, tuple):
        contacts = contact_flags(*contacts)
    values = {
        "arm_qpos": state.arm_qpos,
        "hand_qpos": state.hand_qpos,
        "arm_qvel": state.arm_qvel,
        "hand_qvel": state.hand_qvel,
        "hand_pos": state.hand_pos,
        "hand_quat": state.hand_quat,
        "distance_chain": np.concatenate(
            [current_chain.flatten(), reference_chain.flatten()]
        ),
        "contact": contacts,
        "actuator": state.actuator,
        "time": [step / horizon if horizon else 0.0],
        "ref_hand_pos": reference.hand_pos,
        "ref_hand_quat": reference.hand_quat,
        "ref_obj_pos": reference.obj_pos,
        "ref_obj_quat": reference.obj_quat,
    }
    return np.concatenate(
        [_block(name, values[name], size) for name, size in OBSERVATION_LAYOUT]
    )


def evaluate_rollout(traj, rollout, cfg: RewardConfig) -> list[StepReward]:
    """Scores each rollout step against the reference frame with the same index.

    Steps past the end of the reference hold its last frame. Scoring stops after
    the first step that trips early termination.
    """
    object_id = cfg.target_object or traj.object_ids[0]
    if object_id not in traj.object_ids:
        raise DimensionMismatch(
            f"unknown object {object_id!r}, trajectory has {list(traj.object_ids)}",
            field="target_object",
        )
    results = []
    for record in rollout:
        frame = traj.frames[min(max(record.step, 0), len(traj) - 1)]
        if object_id not in record.objects:
            raise DimensionMismatch(
                f"step {record.step} has no pose for {object_id!r}", field="objects"
            )
        ref_pose = frame.object_pose(object_id)
        pose = record.objects[object_id]

        current = distance_chain(pose, record.left_hand, record.right_hand)
        reference = distance_chain(
            ref_pose, frame.left_hand.keypoints, frame.right_hand.keypoints
        )
        n_contact = contact_count(record.contacts)
        r_chain = chain_reward(current, reference, n_contact, cfg)
        r_obj = object_tracking_reward(
            pose.position, pose.orientation, ref_pose.position, ref_pose.orientation, cfg
        )
        r_penalty = power_penalty(record.joints, cfg)
        terminated = should_terminate_early(
            pose.position, ref_pose.position, cfg.termination_distance
        )
        results.append(
            StepReward(
                step=record.step,
                r_chain=r_chain,
                r_obj=r_obj,
                r_penalty=r_penalty,
                total=total_reward(r_chain, r_obj, r_penalty, cfg),
                n_contact=n_contact,
                terminated=terminated,
            )
        )
        if terminated:
            break
    return results
