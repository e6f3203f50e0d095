"""Per-tick safety guard for the constrained teleoperation loop.

`check` evaluates one proposed joint step against seven conditions:

a. fulcrum constraint — tool-axis distance to the recorded hole point,
b. joint limits with a configurable margin,
c. joint speeds against the model's velocity limits with a margin,
d. distance to singularity via the smallest Jacobian singular value,
e. arm configuration (shoulder/elbow/wrist branch) must not flip,
f. flange stays within a linear-reachability sphere around the base,
g. the tool shaft (a capsule) must not touch the training-box walls
   except where it passes through its own entry hole.

Violations are returned as `SafetyEvent` records; callers decide policy
(the twin holds the arm).  Events map to bit flags for compact traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import Workspace
from .kinematics import Pose, RobotModel, forward_kinematics, jacobian
from .rcm import FulcrumFrame, rcm_error

__all__ = [
    "SafetyLimits",
    "SafetyEvent",
    "SafetyKind",
    "branch_signature",
    "check",
    "flags_from_events",
    "FLAG_RCM",
    "FLAG_JOINT_LIMIT",
    "FLAG_SPEED",
    "FLAG_SINGULARITY",
    "FLAG_CONFIGURATION",
    "FLAG_UNREACHABLE",
    "FLAG_COLLISION",
    "FLAG_WORKSPACE_CLAMP",
    "FLAG_HOLD",
]


class SafetyKind(str, Enum):
    RCM_VIOLATION = "RcmViolation"
    JOINT_LIMIT = "JointLimit"
    SPEED_LIMIT = "SpeedLimit"
    SINGULARITY = "Singularity"
    CONFIGURATION_CHANGE = "ConfigurationChange"
    UNREACHABLE = "Unreachable"
    COLLISION = "Collision"


# Bit flags for the trace/snapshot `flags` field.  The workspace-clamp and
# hold bits are set by the twin, not by `check`.
FLAG_RCM = 1
FLAG_JOINT_LIMIT = 2
FLAG_SPEED = 4
FLAG_SINGULARITY = 8
FLAG_CONFIGURATION = 16
FLAG_UNREACHABLE = 32
FLAG_COLLISION = 64
FLAG_WORKSPACE_CLAMP = 128
FLAG_HOLD = 256

_KIND_FLAG = {
    SafetyKind.RCM_VIOLATION: FLAG_RCM,
    SafetyKind.JOINT_LIMIT: FLAG_JOINT_LIMIT,
    SafetyKind.SPEED_LIMIT: FLAG_SPEED,
    SafetyKind.SINGULARITY: FLAG_SINGULARITY,
    SafetyKind.CONFIGURATION_CHANGE: FLAG_CONFIGURATION,
    SafetyKind.UNREACHABLE: FLAG_UNREACHABLE,
    SafetyKind.COLLISION: FLAG_COLLISION,
}


@dataclass(frozen=True)
class SafetyLimits:
    """Thresholds for the per-tick checks (SI units).

    ``rcm_error_max`` is far above the error a healthy run produces and far
    below the hole-minus-shaft clearance.  ``joint_margin`` shrinks the
    allowed joint range on both ends; ``speed_margin`` derates the velocity
    limits by that fraction.
    """

    rcm_error_max: float = 5.0e-4
    singularity_sigma_min: float = 1.0e-3
    joint_margin: float = 0.1
    speed_margin: float = 0.1
    reach_max: float = 0.55

    def __post_init__(self):
        for name in ("rcm_error_max", "singularity_sigma_min", "joint_margin",
                     "speed_margin", "reach_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SafetyEvent:
    """One tripped check; ``detail`` carries the measured quantity."""

    kind: SafetyKind
    arm: str
    tick: int
    detail: float

    def __str__(self) -> str:  # pragma: no cover - convenience only
        return f"{self.kind.value}({self.arm}@{self.tick}: {self.detail:.3g})"


def flags_from_events(events) -> int:
    out = 0
    for ev in events:
        out |= _KIND_FLAG[ev.kind]
    return out


def branch_signature(model: RobotModel, q: np.ndarray, flange: Pose) -> tuple[int, int, int]:
    """Configuration branch of a joint solution as (shoulder, elbow, wrist) signs.

    ``flange`` must be expressed in the robot base frame (the shoulder test
    compares q1 against the azimuth of the wrist point about the base axis).
    The wrist point is the flange retracted along the tool axis by the last
    link offset; the shoulder sign says on which side of the shoulder plane
    it lies, while the elbow and wrist signs follow the corresponding joint
    angles directly.
    """
    q = np.asarray(q, dtype=float)
    d6 = float(model.dh[5, 1])
    p5 = flange.position - d6 * flange.rotation[:, 2]
    psi = math.atan2(p5[1], p5[0])
    shoulder = 1 if math.cos(q[0] - psi) >= 0.0 else -1
    elbow = 1 if q[2] >= 0.0 else -1
    wrist = 1 if q[4] >= 0.0 else -1
    return (shoulder, elbow, wrist)


def _shaft_collision(flange_pos: np.ndarray, tip: np.ndarray, hole: np.ndarray,
                     box_lo: np.ndarray, box_hi: np.ndarray,
                     tool_radius: float, hole_radius: float) -> float | None:
    """Penetration depth (m) of the shaft capsule into a box wall, or None.

    The shaft may cross the top face only inside its entry hole.  The check
    is exact for the docked geometry (tip below the top plane) and falls
    back to a densely sampled capsule-vs-box distance otherwise.
    """
    top = box_hi[2]
    if tip[2] < top and flange_pos[2] > top:
        # crossing point of the axis with the top plane
        t = (top - flange_pos[2]) / (tip[2] - flange_pos[2])
        cross = flange_pos + t * (tip - flange_pos)
        miss = math.hypot(cross[0] - hole[0], cross[1] - hole[1])
        overlap = miss + tool_radius - hole_radius
        if overlap > 0.0:
            return overlap
        # submerged part must keep a tool radius from the other five walls
        lo = box_lo + tool_radius
        hi = box_hi - tool_radius
        worst = 0.0
        for axis in range(2):
            worst = max(worst, lo[axis] - tip[axis], tip[axis] - hi[axis])
        worst = max(worst, lo[2] - tip[2])
        return worst if worst > 0.0 else None
    # general case: sampled capsule-vs-box clearance with hole exemption
    ts = np.linspace(0.0, 1.0, 200)[:, None]
    pts = flange_pos[None, :] + ts * (tip - flange_pos)[None, :]
    outside = np.maximum(box_lo - pts, 0.0) + np.maximum(pts - box_hi, 0.0)
    dist = np.linalg.norm(outside, axis=1)
    inside = dist == 0.0
    near_hole = (np.linalg.norm(pts[:, :2] - hole[None, :2], axis=1) <= hole_radius) & (
        np.abs(pts[:, 2] - box_hi[2]) <= 2.0 * tool_radius
    )
    if np.any(inside & ~near_hole):
        return tool_radius  # interior penetration away from the hole
    touching = (dist < tool_radius) & ~inside & ~near_hole
    if np.any(touching):
        return float(tool_radius - dist[touching].min())
    return None


def check(
    model: RobotModel,
    prev_q: np.ndarray,
    next_q: np.ndarray,
    flange: Pose,
    frame: FulcrumFrame,
    limits: SafetyLimits,
    dt: float,
    *,
    base_position: np.ndarray,
    workspace: Workspace | None = None,
    arm: str = "left",
    tick: int = 0,
) -> list[SafetyEvent]:
    """Evaluate the step ``prev_q -> next_q`` (world-frame ``flange`` pose).

    Returns the (possibly empty) list of violations; never raises on a
    violation.  ``workspace`` enables the shaft-vs-box collision check.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    prev_q = np.asarray(prev_q, dtype=float)
    next_q = np.asarray(next_q, dtype=float)
    events: list[SafetyEvent] = []

    err = rcm_error(frame, flange)
    if err > limits.rcm_error_max:
        events.append(SafetyEvent(SafetyKind.RCM_VIOLATION, arm, tick, err))

    lo = model.joint_limits[:, 0] + limits.joint_margin
    hi = model.joint_limits[:, 1] - limits.joint_margin
    if np.any(next_q < lo) or np.any(next_q > hi):
        overshoot = float(np.max(np.maximum(lo - next_q, next_q - hi)))
        events.append(SafetyEvent(SafetyKind.JOINT_LIMIT, arm, tick, overshoot))

    speed = np.abs(next_q - prev_q) / dt
    allowed = model.velocity_limits * (1.0 - limits.speed_margin)
    if np.any(speed > allowed):
        events.append(SafetyEvent(SafetyKind.SPEED_LIMIT, arm, tick,
                                  float(np.max(speed / allowed))))

    sigma_min = float(np.linalg.svd(jacobian(model, next_q), compute_uv=False)[-1])
    if sigma_min < limits.singularity_sigma_min:
        events.append(SafetyEvent(SafetyKind.SINGULARITY, arm, tick, sigma_min))

    if not np.array_equal(prev_q, next_q):
        # signatures need base-frame poses (shoulder azimuth about base axis)
        prev_base = forward_kinematics(model, prev_q)
        next_base = forward_kinematics(model, next_q)
        if branch_signature(model, prev_q, prev_base) != branch_signature(
            model, next_q, next_base
        ):
            events.append(SafetyEvent(SafetyKind.CONFIGURATION_CHANGE, arm, tick, 1.0))

    reach = float(np.linalg.norm(flange.position - np.asarray(base_position, float)))
    if reach > limits.reach_max:
        events.append(SafetyEvent(SafetyKind.UNREACHABLE, arm, tick, reach))

    if workspace is not None:
        half = workspace.box_dims / 2.0
        box_lo = workspace.box_center - half
        box_hi = workspace.box_center + half
        tip = flange.position + flange.rotation @ model.tcp_offset
        depth = _shaft_collision(
            flange.position, tip, frame.hole, box_lo, box_hi,
            workspace.tool_diameter / 2.0, workspace.hole_diameter / 2.0,
        )
        if depth is not None:
            events.append(SafetyEvent(SafetyKind.COLLISION, arm, tick, depth))

    return events
