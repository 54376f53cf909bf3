import logging

import numpy as np

from app.dagger.models import (
    HybridConfig,
    JointTrace,
    Policy,
    SaturatedReachingPolicy,
)
from app.errors import DimensionMismatch
from app.simworld.models import KinematicChain
from app.simworld.services import chain_step

logger = logging.getLogger(__name__)


def hybrid_control_loop(
    policy: Policy, sim_chain: KinematicChain, real_chain: KinematicChain, steps, dt
) -> JointTrace:
    """Infers from the real joints, steps the sim chain, then tracks it on the real one.

    The returned trace has the sim joints as commanded and the real joints as reached.
    """
    if len(sim_chain) != len(real_chain):
        raise DimensionMismatch(
            f"sim chain has {len(sim_chain)} joints, real chain {len(real_chain)}"
        )
    sim_trace, real_trace = [], []
    saturated = False
    for _ in range(steps):
        action = policy.act(real_chain.q)
        sim_chain = chain_step(sim_chain, action, dt)
        real_chain = chain_step(real_chain, sim_chain.q, dt)
        saturated |= sim_chain.saturated or real_chain.saturated
        sim_trace.append(sim_chain.q)
        real_trace.append(real_chain.q)
    return JointTrace(
        _stack(sim_trace, sim_chain), _stack(real_trace, real_chain), saturated
    )


def naive_control_loop(
    policy: Policy, real_chain: KinematicChain, steps, dt
) -> JointTrace:
    """Sends each policy action straight to the real chain as its joint target."""
    targets, reached = [], []
    saturated = False
    for _ in range(steps):
        action = policy.act(real_chain.q)
        real_chain = chain_step(real_chain, action, dt)
        saturated |= real_chain.saturated
        targets.append(np.asarray(action, dtype=float))
        reached.append(real_chain.q)
    return JointTrace(_stack(targets, real_chain), _stack(reached, real_chain), saturated)


def _stack(rows, chain):
    return np.stack(rows) if rows else np.zeros((0, len(chain)))


def run_hybrid_comparison(cfg: HybridConfig, seed):
    """Paired hybrid and naive runs toward one seeded joint goal."""
    rng = np.random.default_rng(seed)
    goal = rng.uniform(cfg.goal_low, cfg.goal_high, size=cfg.n_joints) * rng.choice(
        [-1.0, 1.0], size=cfg.n_joints
    )
    policy = SaturatedReachingPolicy(goal, cfg.gain, cfg.max_step)

    def chain(tau):
        return KinematicChain.at_rest(cfg.n_joints, tau, cfg.joint_limit)

    hybrid = hybrid_control_loop(
        policy, chain(cfg.tau_sim), chain(cfg.tau_real), cfg.steps, cfg.dt
    )
    naive = naive_control_loop(policy, chain(cfg.tau_real), cfg.steps, cfg.dt)
    if cfg.steps:
        logger.info(
            f"Terminal deviation hybrid={hybrid.deviation[-1]:.6g} "
            f"naive={naive.deviation[-1]:.6g}"
        )
    return hybrid, naive
