"""Remote-centre-of-motion geometry about a fixed pivot hole.

The flange is parameterised in spherical coordinates centred on the hole:

    x = xh + r cos(theta) cos(phi)
    y = yh + r cos(theta) sin(phi)
    z = zh + r sin(theta)

where theta is latitude, phi longitude and r the outside length of the
tool (flange to hole).  The tool is mounted along the flange +z axis, so
keeping the flange oriented with

    roll = theta + pi/2,  pitch = 0,  yaw = phi - pi/2

points the tool axis exactly through the hole for every (theta, phi).
Incremental commands move the state one tick at a time:

    theta += d_theta,  phi += d_phi,  r += d_r

and the flange orientation follows with roll tracking theta and yaw
tracking phi from the recorded docking values, pitch pinned at zero.
Moving strictly inside this parameterisation is what enforces the pivot
constraint; only servo dynamics introduce deviation.

Insertion convention: r is the OUTSIDE length, so moving the tip deeper
into the box means d_r < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateDirectionError,
    FulcrumMisalignmentError,
    ToolRetractedError,
    UndefinedDirectionError,
)
from .kinematics import Pose, rpy_to_matrix

ALIGNMENT_TOLERANCE = 1e-3  # m, docking axis must pass this close to the hole


@dataclass(frozen=True)
class SphericalState:
    """Spherical coordinates of the flange about the pivot, plus tool DOF.

    theta/phi in radians, r in metres (outside length, 0 < r < tool length),
    spin is the free roll of the instrument shaft and grasp the jaw opening
    fraction in [0, 1].
    """

    theta: float
    phi: float
    r: float
    spin: float = 0.0
    grasp: float = 0.0


@dataclass(frozen=True)
class RcmCommand:
    """Per-tick increments applied to a SphericalState."""

    d_theta: float = 0.0
    d_phi: float = 0.0
    d_r: float = 0.0
    d_spin: float = 0.0
    d_grasp: float = 0.0

    def is_zero(self) -> bool:
        return (
            self.d_theta == 0.0
            and self.d_phi == 0.0
            and self.d_r == 0.0
            and self.d_spin == 0.0
            and self.d_grasp == 0.0
        )


@dataclass(frozen=True)
class FulcrumFrame:
    """Recorded docking of one tool through one hole."""

    hole: np.ndarray
    tool_length: float
    theta0: float
    phi0: float
    r0: float
    roll0: float
    pitch0: float
    yaw0: float

    def __post_init__(self):
        hole = np.asarray(self.hole, dtype=float).reshape(3).copy()
        hole.flags.writeable = False
        object.__setattr__(self, "hole", hole)
        if not (0.0 < self.r0 < self.tool_length):
            raise ValueError("docked outside length must satisfy 0 < r0 < tool_length")


@dataclass(frozen=True)
class WorkspaceLimits:
    """Clamp ranges for the spherical state."""

    theta_limit: float
    r_min: float
    r_max: float


class StepResult(NamedTuple):
    state: SphericalState
    limit_hit: bool


def radial_direction(theta: float, phi: float) -> np.ndarray:
    """Unit vector from the hole towards the flange."""
    ct = math.cos(theta)
    return np.array([ct * math.cos(phi), ct * math.sin(phi), math.sin(theta)])


def record_fulcrum(flange: Pose, tool_length: float, hole) -> FulcrumFrame:
    """Record the pivot frame from a docked flange pose.

    The tool axis (flange +z scaled to tool_length) must pass within
    ALIGNMENT_TOLERANCE of the hole and point towards it; the recorded
    orientation is the axis-aligned one with pitch zeroed by rotating the
    terminal joint, i.e. roll0 = theta0 + pi/2 and yaw0 = phi0 - pi/2.
    """
    hole = np.asarray(hole, dtype=float).reshape(3)
    axis = flange.rotation[:, 2]
    to_hole = hole - flange.position
    span = float(np.linalg.norm(to_hole))
    if span < 1e-9:
        raise UndefinedDirectionError("flange sits exactly on the hole")
    if float(to_hole @ axis) <= 0.0:
        raise FulcrumMisalignmentError("tool axis points away from the hole")
    miss = float(np.linalg.norm(np.cross(to_hole, axis)))
    if miss > ALIGNMENT_TOLERANCE:
        raise FulcrumMisalignmentError(
            f"tool axis misses the hole by {miss * 1e3:.2f} mm"
        )
    if tool_length <= span:
        raise ToolRetractedError(
            f"tool length {tool_length} m does not reach past the hole ({span:.3f} m outside)"
        )
    offset = flange.position - hole
    r0 = span
    theta0 = math.asin(max(-1.0, min(1.0, offset[2] / r0)))
    phi0 = math.atan2(offset[1], offset[0])
    return FulcrumFrame(
        hole=hole,
        tool_length=float(tool_length),
        theta0=theta0,
        phi0=phi0,
        r0=r0,
        roll0=theta0 + math.pi / 2,
        pitch0=0.0,
        yaw0=phi0 - math.pi / 2,
    )


def step_spherical(
    state: SphericalState, command: RcmCommand, limits: WorkspaceLimits
) -> StepResult:
    """Apply one increment, clamping theta, r and grasp to their ranges."""
    theta = state.theta + command.d_theta
    phi = state.phi + command.d_phi
    r = state.r + command.d_r
    grasp = state.grasp + command.d_grasp
    spin = state.spin + command.d_spin
    clamped_theta = max(-limits.theta_limit, min(limits.theta_limit, theta))
    clamped_r = max(limits.r_min, min(limits.r_max, r))
    clamped_grasp = max(0.0, min(1.0, grasp))
    hit = clamped_theta != theta or clamped_r != r or clamped_grasp != grasp
    return StepResult(
        SphericalState(clamped_theta, phi, clamped_r, spin, clamped_grasp), hit
    )


def flange_position(frame: FulcrumFrame, state: SphericalState) -> np.ndarray:
    """Flange position for a spherical state (hole + r * radial direction)."""
    return frame.hole + state.r * radial_direction(state.theta, state.phi)


def spherical_from_position(frame: FulcrumFrame, position) -> SphericalState:
    """Invert flange_position; spin and grasp come back as zero.

    theta is recovered through asin and is unique away from the poles;
    phi through atan2 in (-pi, pi].
    """
    offset = np.asarray(position, dtype=float).reshape(3) - frame.hole
    r = float(np.linalg.norm(offset))
    if r < 1e-12:
        raise UndefinedDirectionError("position coincides with the hole")
    theta = math.asin(max(-1.0, min(1.0, offset[2] / r)))
    phi = math.atan2(offset[1], offset[0])
    return SphericalState(theta=theta, phi=phi, r=r)


def flange_orientation(
    frame: FulcrumFrame, state: SphericalState
) -> tuple[float, float, float]:
    """ZYX Euler angles keeping the tool axis through the hole.

    Roll moves one-for-one with latitude and yaw with longitude from the
    recorded docking angles; pitch stays at the recorded zero.
    """
    return (
        frame.roll0 + (state.theta - frame.theta0),
        frame.pitch0,
        frame.yaw0 + (state.phi - frame.phi0),
    )


def flange_pose(frame: FulcrumFrame, state: SphericalState) -> Pose:
    """Full flange pose (position plus constraint-aligned orientation)."""
    roll, pitch, yaw = flange_orientation(frame, state)
    return Pose(flange_position(frame, state), rpy_to_matrix(roll, pitch, yaw))


def tip_position(frame: FulcrumFrame, state: SphericalState) -> np.ndarray:
    """Tool-tip point: the inside remainder of the tool past the hole."""
    inside = frame.tool_length - state.r
    if inside <= 0.0:
        raise ToolRetractedError("tool tip sits outside the body wall")
    return frame.hole - inside * radial_direction(state.theta, state.phi)


def tip_delta_to_command(
    frame: FulcrumFrame, state: SphericalState, d_tip
) -> RcmCommand:
    """Spherical increments producing a desired small tip displacement.

    Solves the 3x3 tip Jacobian in closed form; its columns with respect to
    (theta, phi, r) are mutually orthogonal with norms (L - r), (L - r)
    cos(theta) and 1, so the system degenerates when the tip reaches the
    hole (r -> L) or the latitude becomes polar (theta -> +-pi/2).
    Lateral tip motion maps to flange motion of the opposite sign across
    the pivot (the fulcrum inversion).
    """
    d_tip = np.asarray(d_tip, dtype=float).reshape(3)
    inside = frame.tool_length - state.r
    ct = math.cos(state.theta)
    if abs(inside) < 1e-9 or abs(ct) < 1e-9:
        raise DegenerateDirectionError(
            "tip motion is undefined at the hole or at polar latitude"
        )
    st = math.sin(state.theta)
    cp, sp = math.cos(state.phi), math.sin(state.phi)
    col_theta = np.array([st * cp, st * sp, -ct])  # times (L - r), unit here
    col_phi = np.array([sp, -cp, 0.0])  # times (L - r) cos(theta)
    col_r = radial_direction(state.theta, state.phi)
    return RcmCommand(
        d_theta=float(d_tip @ col_theta) / inside,
        d_phi=float(d_tip @ col_phi) / (inside * ct),
        d_r=float(d_tip @ col_r),
    )


def rcm_error(frame: FulcrumFrame, flange: Pose) -> float:
    """Perpendicular distance (m) from the hole to the flange tool axis."""
    axis = flange.rotation[:, 2]
    to_hole = frame.hole - flange.position
    return float(np.linalg.norm(np.cross(to_hole, axis)))
