import numpy as np

from app.geometry import RigidTransform
from app.pnp_servo.models import CorrespondenceSet, default_extrinsic
from app.simworld.models import BaseState, LandmarkField, WorldConfig
from app.simworld.services import (
    generate_field,
    ground_truth_error,
    observe,
    step_base,
    steering_turn,
    wheel_heading,
)


class SimulatedBase:
    """Omnidirectional base with a mounted camera in a seeded landmark field.

    The wheels start parked along body +x. reorientations counts the commands
    that swung them; steering and coupling_travel accumulate the swing (rad)
    and the sideways shift it caused (m).
    """

    def __init__(
        self,
        cfg: WorldConfig,
        start: BaseState,
        goal: BaseState,
        extrinsic: RigidTransform | None = None,
        field: LandmarkField | None = None,
        seed=None,
    ):
        self.cfg = cfg
        self.state = start
        self.goal = goal
        self.extrinsic = default_extrinsic() if extrinsic is None else extrinsic
        self.field = generate_field(cfg) if field is None else field
        self.intrinsics = cfg.intrinsics
        self.last_depth = None
        self.last_command = None
        self.wheel_heading = 0.0
        self.reorientations = 0
        self.steering = 0.0
        self.coupling_travel = 0.0
        self._rng = np.random.default_rng(cfg.seed if seed is None else seed)

    def observe(self, goal=None) -> CorrespondenceSet:
        corrs, self.last_depth = observe(
            self.state,
            self.goal if goal is None else goal,
            self.field,
            self.intrinsics,
            self.cfg,
            self._rng.integers(2**32),
            self.extrinsic,
        )
        return corrs

    def command(self, velocity, dt):
        heading = wheel_heading(velocity, self.wheel_heading)
        turn = steering_turn(self.wheel_heading, heading)
        self.state = step_base(
            self.state,
            velocity,
            dt,
            self.cfg,
            self._rng.integers(2**32),
            heading=self.wheel_heading,
        )
        if turn > 0:
            self.reorientations += 1
        self.steering += turn
        self.coupling_travel += self.cfg.coupling_gain * turn
        self.wheel_heading = heading
        self.last_command = tuple(velocity)

    def ground_truth_error(self):
        return ground_truth_error(self.state, self.goal)
