"""2D closed-track driving environment with a kinematic bicycle car."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Frame, render_camera
from .errors import ConfigError, ProtocolError
from .track import TrackSpec, cross_track_error


@dataclass(frozen=True)
class Action:
    """Continuous (steering, throttle); clamped to range on construction."""

    steering: float
    throttle: float

    def __post_init__(self):
        object.__setattr__(self, "steering", float(min(1.0, max(-1.0, self.steering))))
        object.__setattr__(self, "throttle", float(min(1.0, max(0.0, self.throttle))))


@dataclass
class CarState:
    x: float
    y: float
    heading: float  # radians, normalized to (-pi, pi]
    speed: float  # m/s, in [0, v_max]
    wheelbase: float = 0.3

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class CarParams:
    wheelbase: float = 0.3
    max_steer: float = math.radians(30.0)  # steering command of 1.0 in radians
    v_max: float = 5.0
    k_acc: float = 2.0  # throttle response rate, 1/s


@dataclass(frozen=True)
class RewardParams:
    mode: str = "throttle_shaped"  # or "cte_shaped"
    w1: float = 5.0
    w2: float = 0.1
    max_cte: float = 2.5

    def __post_init__(self):
        if self.mode not in ("throttle_shaped", "cte_shaped"):
            raise ConfigError(f"unknown reward mode '{self.mode}'")
        if not (math.isfinite(self.w1) and math.isfinite(self.w2)) or self.w1 < 0 or self.w2 < 0:
            raise ConfigError(f"reward weights must be finite and >= 0, got w1={self.w1} w2={self.w2}")
        if self.max_cte <= 0:
            raise ConfigError(f"max_cte must be > 0, got {self.max_cte}")


@dataclass
class StepResult:
    observation: Frame
    reward: float
    done: bool
    info: dict


def reward_cte_shaped(cte: float, max_cte: float, speed: float) -> float:
    """1 - (|cte| / max_cte) * speed, exactly as printed."""
    if max_cte <= 0:
        raise ConfigError(f"max_cte must be > 0, got {max_cte}")
    return 1.0 - (abs(cte) / max_cte) * speed


def reward_throttle_shaped(on_track: bool, throttle: float, params: RewardParams) -> float:
    """+1 + w2*throttle while on track; -10 - w1*throttle when off."""
    if on_track:
        return 1.0 + params.w2 * throttle
    return -10.0 - params.w1 * throttle


def _wrap_angle(theta: float) -> float:
    """Normalize to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def bicycle_step(state: CarState, action: Action, dt: float, params: CarParams) -> CarState:
    """One explicit-Euler update of the kinematic bicycle.

    Position advances along the old heading at the old speed, then heading,
    then speed relaxes toward throttle * v_max at rate k_acc.
    """
    x = state.x + state.speed * dt * math.cos(state.heading)
    y = state.y + state.speed * dt * math.sin(state.heading)
    heading = state.heading + (state.speed / params.wheelbase) * math.tan(action.steering * params.max_steer) * dt
    speed = state.speed + params.k_acc * (action.throttle * params.v_max - state.speed) * dt
    return CarState(
        x=x,
        y=y,
        heading=_wrap_angle(heading),
        speed=min(params.v_max, max(0.0, speed)),
        wheelbase=params.wheelbase,
    )


class DrivingEnv:
    """Deterministic single-car environment over a `TrackSpec`.

    Not safe for concurrent stepping; run independent instances in
    parallel instead.
    """

    def __init__(
        self,
        track: TrackSpec,
        reward: RewardParams | None = None,
        width: int = 64,
        height: int = 48,
        dt: float = 0.05,
        step_cap: int = 1000,
        car: CarParams = CarParams(),
    ):
        if dt <= 0:
            raise ConfigError(f"dt must be > 0, got {dt}")
        self.track = track
        self.reward_params = reward if reward is not None else RewardParams(max_cte=track.max_cte)
        self.width = width
        self.height = height
        self.dt = dt
        self.step_cap = step_cap
        self.car_params = car
        self.state: CarState | None = None
        self.step_index = 0
        self._done = True
        self._last_throttle = 0.0

    def reset(self, seed: int = 0, jitter: bool = True) -> StepResult:
        """Place the car on the centerline at waypoint 0, heading along track."""
        rng = np.random.default_rng(seed)
        offset = float(rng.uniform(-1.0, 1.0)) * 0.1 * self.track.road_half_width if jitter else 0.0
        start = self.track.centerline[0]
        heading = self.track.heading_at(0.0)
        left = np.array([-math.sin(heading), math.cos(heading)])
        pos = start + offset * left
        self.state = CarState(
            x=float(pos[0]), y=float(pos[1]), heading=heading, speed=0.0, wheelbase=self.car_params.wheelbase
        )
        self.step_index = 0
        self._done = False
        self._last_throttle = 0.0
        cte = cross_track_error(self.state.position, self.track)
        return StepResult(
            observation=self._render(),
            reward=0.0,
            done=False,
            info={"cte": cte, "speed": 0.0, "on_track": abs(cte) <= self.track.max_cte, "step_index": 0},
        )

    def step(self, action: Action) -> StepResult:
        if self.state is None:
            raise ProtocolError("step() before reset()")
        if self._done:
            raise ProtocolError("step() after episode end; call reset()")
        self.state = bicycle_step(self.state, action, self.dt, self.car_params)
        self.step_index += 1
        self._last_throttle = action.throttle

        cte = cross_track_error(self.state.position, self.track)
        on_track = abs(cte) <= self.track.max_cte
        done = (not on_track) or self.step_index >= self.step_cap
        self._done = done

        if self.reward_params.mode == "throttle_shaped":
            reward = reward_throttle_shaped(on_track, action.throttle, self.reward_params)
        else:
            reward = reward_cte_shaped(cte, self.reward_params.max_cte, self.state.speed)

        return StepResult(
            observation=self._render(),
            reward=reward,
            done=done,
            info={"cte": cte, "speed": self.state.speed, "on_track": on_track, "step_index": self.step_index},
        )

    def _render(self) -> Frame:
        return render_camera(self.state.position, self.state.heading, self.track, self.width, self.height)
