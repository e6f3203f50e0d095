"""Fixed-rate joint servo: a velocity-clamped first-order tracker.

The simulated controller runs at a fixed control rate (125 Hz by default)
and pulls the joints toward a target with time constant ``lookahead_time``:

    qd = clamp((q_target - q) * gain, +-max_joint_vel)
    q' = q + qd * dt

With ``gain = 1 / lookahead_time`` and ``gain * dt <= 1`` the response to a
constant target is a monotone first-order decay with no overshoot.  Callers
that know the target's rate of change (the twin's tick loop does) can feed a
forward-extrapolated target to get exact tracking of constant-velocity
ramps; the residual error is then of order ``accel * dt * lookahead_time``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .kinematics import N_JOINTS

__all__ = ["ServoConfig", "RobotState", "servo_step"]

#: Vendor-documented bounds for the lookahead smoothing window (seconds).
LOOKAHEAD_MIN = 0.03
LOOKAHEAD_MAX = 0.2

DEFAULT_CONTROL_RATE = 125.0
DEFAULT_LOOKAHEAD = 0.1


@dataclass(frozen=True)
class ServoConfig:
    """Servo loop parameters.

    ``gain`` defaults to ``1 / lookahead_time``; ``max_joint_vel`` is a
    scalar or per-joint array of rad/s.
    """

    control_rate: float = DEFAULT_CONTROL_RATE
    lookahead_time: float = DEFAULT_LOOKAHEAD
    gain: float | None = None
    max_joint_vel: float | np.ndarray = math.pi

    def __post_init__(self):
        if not self.control_rate > 0.0:
            raise ValueError("control_rate must be positive")
        if not (LOOKAHEAD_MIN <= self.lookahead_time <= LOOKAHEAD_MAX):
            raise ValueError(
                f"lookahead_time must lie in [{LOOKAHEAD_MIN}, {LOOKAHEAD_MAX}] s"
            )
        gain = self.gain if self.gain is not None else 1.0 / self.lookahead_time
        if not gain > 0.0:
            raise ValueError("gain must be positive")
        if gain * self.dt > 1.0:
            raise ValueError("gain * dt must not exceed 1 (would overshoot)")
        vmax = np.asarray(self.max_joint_vel, dtype=float)
        if not np.all(vmax > 0.0):
            raise ValueError("max_joint_vel must be positive")
        vmax = np.broadcast_to(vmax, (N_JOINTS,)).copy()
        vmax.flags.writeable = False
        object.__setattr__(self, "gain", float(gain))
        object.__setattr__(self, "max_joint_vel", vmax)

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate


@dataclass(frozen=True)
class RobotState:
    """Snapshot of the simulated arm at one tick.

    ``q`` includes the operator's axial spin on the last joint; ``grasp`` is
    the forceps opening fraction (0 open, 1 closed); ``time`` is the logical
    clock ``tick / control_rate``.
    """

    q: np.ndarray
    qd: np.ndarray
    grasp: float = 0.0
    spin_offset: float = 0.0
    tick: int = 0
    time: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(N_JOINTS).copy()
        qd = np.asarray(self.qd, dtype=float).reshape(N_JOINTS).copy()
        q.flags.writeable = False
        qd.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)

    @classmethod
    def at_rest(cls, q: np.ndarray) -> "RobotState":
        return cls(q=q, qd=np.zeros(N_JOINTS))


def servo_step(state: RobotState, q_target: np.ndarray, cfg: ServoConfig) -> RobotState:
    """Advance the servo one control period toward ``q_target``.

    Velocity is clamped to ``cfg.max_joint_vel`` per joint.  The state's
    tick counter advances by one and ``time`` tracks the logical clock.
    """
    target = np.asarray(q_target, dtype=float).reshape(N_JOINTS)
    if not np.all(np.isfinite(target)):
        raise ValueError("q_target must be finite")
    qd = np.clip((target - state.q) * cfg.gain, -cfg.max_joint_vel, cfg.max_joint_vel)
    q = state.q + qd * cfg.dt
    tick = state.tick + 1
    return replace(state, q=q, qd=qd, tick=tick, time=tick * cfg.dt)
