"""The two-arm digital twin: command integration, IK, safety, servo, traces.

Each tick applies per-arm spherical increments, synthesizes the constrained
flange pose, solves joints by seeded inverse kinematics, runs the safety
guard, and advances the joint servo toward the commanded joints.  The servo
target is forward-extrapolated from the last two commands by the lookahead
window, which makes constant-rate motion track exactly and leaves only an
``accel * dt * lookahead`` residual during speed changes.

On any safety violation (or IK failure) the offending arm's spherical step
is rolled back and the arm enters HOLD: its commanded joints freeze until
`resume`.  The simulation clock is logical (ticks); nothing here reads the
wall clock, so identical command streams give identical traces.

`replay` drives one arm's tool tip along a reference polyline with a
trapezoidal speed profile (accelerate, cruise, slow into sharp corners) and
records a per-tick trace suitable for error reports and CSV export.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .config import ARM_NAMES, ArmPlacement, Workspace, load_robot_model, load_workspace
from .errors import JointLimitError, RcmTwinError, UnreachableTargetError
from .kinematics import Pose, RobotModel, forward_kinematics, inverse_kinematics
from .rcm import (
    FulcrumFrame,
    RcmCommand,
    SphericalState,
    WorkspaceLimits,
    flange_pose,
    rcm_error,
    record_fulcrum,
    spherical_from_position,
    step_spherical,
    tip_delta_to_command,
    tip_position,
)
from .safety import (
    FLAG_HOLD,
    FLAG_WORKSPACE_CLAMP,
    SafetyEvent,
    SafetyKind,
    SafetyLimits,
    check as safety_check,
    flags_from_events,
)
from .servo import RobotState, ServoConfig, servo_step

__all__ = [
    "ArmSnapshot",
    "DigitalTwin",
    "ReplayResult",
    "TraceRow",
    "ZERO_COMMAND",
    "trace_to_csv",
    "replay",
]

ZERO_COMMAND = RcmCommand(0.0, 0.0, 0.0, 0.0, 0.0)

TRACE_HEADER = (
    "tick,time_s,arm,tip_x,tip_y,tip_z,des_x,des_y,des_z,track_err_mm,rcm_err_mm,flags"
)


@dataclass(frozen=True)
class ArmSnapshot:
    """Published per-arm state after one tick (world frame, SI units)."""

    arm: str
    tick: int
    time_s: float
    q: np.ndarray
    qd: np.ndarray
    flange: Pose
    tip: np.ndarray
    grasp: float
    spin: float
    rcm_error_mm: float
    flags: int
    hold: bool
    events: tuple[SafetyEvent, ...]
    spherical: SphericalState


@dataclass(frozen=True)
class TraceRow:
    tick: int
    time_s: float
    arm: str
    tip: np.ndarray
    desired: np.ndarray
    track_err_mm: float
    rcm_err_mm: float
    flags: int


@dataclass
class _Arm:
    name: str
    placement: ArmPlacement
    frame: FulcrumFrame
    sph: SphericalState
    robot: RobotState
    q_ik: np.ndarray
    q_cmd: np.ndarray
    q_cmd_prev: np.ndarray
    hold: bool = False
    events: tuple[SafetyEvent, ...] = ()
    flags: int = 0


class DigitalTwin:
    """Deterministic two-arm simulator stepped by `tick`."""

    def __init__(
        self,
        model: RobotModel | None = None,
        workspace: Workspace | None = None,
        servo: ServoConfig | None = None,
        limits: SafetyLimits | None = None,
    ):
        self.model = model if model is not None else load_robot_model()
        self.workspace = workspace if workspace is not None else load_workspace()
        self.servo = servo if servo is not None else ServoConfig(
            max_joint_vel=self.model.velocity_limits
        )
        self.limits = limits if limits is not None else SafetyLimits()
        if abs(float(self.model.tcp_offset[2]) - self.workspace.tool_length) > 1e-9:
            raise ValueError(
                "tool length mismatch: robot tcp_offset z "
                f"{self.model.tcp_offset[2]} vs workspace tool_length "
                f"{self.workspace.tool_length}"
            )
        self.sph_limits = WorkspaceLimits(
            theta_limit=self.workspace.theta_limit,
            r_min=self.workspace.r_limits[0],
            r_max=self.workspace.r_limits[1],
        )
        self.tick_count = 0
        self.arms: dict[str, _Arm] = {}
        for name in ARM_NAMES:
            if name in self.workspace.arms:
                self.arms[name] = self._init_arm(name, self.workspace.arms[name])

    # -- construction helpers -------------------------------------------------

    def _init_arm(self, name: str, placement: ArmPlacement) -> _Arm:
        hole = self.workspace.hole_position(placement.hole)
        flange_world = self._world_pose(placement, placement.q_home)
        frame = record_fulcrum(flange_world, self.workspace.tool_length, hole)
        sph = SphericalState(frame.theta0, frame.phi0, frame.r0, spin=0.0, grasp=0.0)
        q = np.asarray(placement.q_home, dtype=float)
        return _Arm(
            name=name,
            placement=placement,
            frame=frame,
            sph=sph,
            robot=RobotState.at_rest(q),
            q_ik=q.copy(),
            q_cmd=q.copy(),
            q_cmd_prev=q.copy(),
        )

    def _world_pose(self, placement: ArmPlacement, q: np.ndarray) -> Pose:
        base = placement.world_from_base()
        local = forward_kinematics(self.model, q)
        return Pose.from_matrix(base @ local.transform)

    def _base_target(self, placement: ArmPlacement, world: Pose) -> Pose:
        inv = np.linalg.inv(placement.world_from_base())
        return Pose.from_matrix(inv @ world.transform)

    # -- public API ------------------------------------------------------------

    @property
    def dt(self) -> float:
        return self.servo.dt

    @property
    def arm_names(self) -> tuple[str, ...]:
        return tuple(self.arms)

    def frame(self, arm: str) -> FulcrumFrame:
        return self.arms[arm].frame

    def spherical(self, arm: str) -> SphericalState:
        return self.arms[arm].sph

    def commanded_tip(self, arm: str) -> np.ndarray:
        a = self.arms[arm]
        return tip_position(a.frame, a.sph)

    def hold(self, arm: str | None = None) -> None:
        """Freeze commanded joints (both arms when ``arm`` is None).

        An operator-requested pause: no event is attached, but snapshots
        carry the hold flag until `resume`.
        """
        for name in ([arm] if arm else list(self.arms)):
            self.arms[name].hold = True

    def resume(self, arm: str | None = None) -> None:
        """Clear HOLD (both arms when ``arm`` is None)."""
        for name in ([arm] if arm else list(self.arms)):
            a = self.arms[name]
            a.hold = False
            a.events = ()

    def reset(self) -> None:
        """Teleport both arms back to their docked home state."""
        self.tick_count = 0
        for name, a in self.arms.items():
            self.arms[name] = self._init_arm(name, a.placement)

    def tick(self, commands: dict[str, RcmCommand] | None = None) -> dict[str, ArmSnapshot]:
        """Advance the world one control period; returns per-arm snapshots."""
        commands = commands or {}
        self.tick_count += 1
        out: dict[str, ArmSnapshot] = {}
        for name in self.arms:  # insertion order: left then right
            out[name] = self._tick_arm(self.arms[name], commands.get(name))
        return out

    # -- internals ---------------------------------------------------------.--

    def _tick_arm(self, arm: _Arm, command: RcmCommand | None) -> ArmSnapshot:
        tick = self.tick_count
        flags = 0
        events: tuple[SafetyEvent, ...] = ()
        cmd = command if command is not None else ZERO_COMMAND
        if arm.hold:
            flags |= FLAG_HOLD | flags_from_events(arm.events)
            events = arm.events
            cmd = ZERO_COMMAND

        if not cmd.is_zero():
            new_sph, limit_hit = step_spherical(arm.sph, cmd, self.sph_limits)
            if limit_hit:
                flags |= FLAG_WORKSPACE_CLAMP
            step_events = self._try_step(arm, new_sph, tick)
            if step_events:
                arm.hold = True
                arm.events = step_events
                events = step_events
                flags |= flags_from_events(step_events) | FLAG_HOLD

        # Servo toward the commanded joints, extrapolating by the lookahead
        # window so a constant-rate command stream is tracked with zero
        # steady-state lag (the -1 accounts for the integration tick itself).
        extrap = (arm.q_cmd - arm.q_cmd_prev) * (self.servo.lookahead_time / self.dt - 1.0)
        arm.q_cmd_prev = arm.q_cmd.copy()
        arm.robot = servo_step(arm.robot, arm.q_cmd + extrap, self.servo)
        arm.robot = replace(arm.robot, grasp=arm.sph.grasp, spin_offset=arm.sph.spin)
        arm.flags = flags

        flange_world = self._world_pose(arm.placement, arm.robot.q)
        tip = flange_world.position + flange_world.rotation @ self.model.tcp_offset
        err_mm = rcm_error(arm.frame, flange_world) * 1000.0
        return ArmSnapshot(
            arm=arm.name,
            tick=tick,
            time_s=tick * self.dt,
            q=arm.robot.q.copy(),
            qd=arm.robot.qd.copy(),
            flange=flange_world,
            tip=tip,
            grasp=arm.robot.grasp,
            spin=arm.robot.spin_offset,
            rcm_error_mm=err_mm,
            flags=flags,
            hold=arm.hold,
            events=events,
            spherical=arm.sph,
        )

    def _try_step(self, arm: _Arm, new_sph: SphericalState, tick: int) -> tuple[SafetyEvent, ...]:
        """IK + safety for a proposed spherical step; commits on success."""
        target_world = flange_pose(arm.frame, new_sph)
        target_base = self._base_target(arm.placement, target_world)
        try:
            q_ik = inverse_kinematics(self.model, arm.q_ik, target_base)
        except UnreachableTargetError:
            return (SafetyEvent(SafetyKind.UNREACHABLE, arm.name, tick, math.nan),)
        except JointLimitError:
            return (SafetyEvent(SafetyKind.JOINT_LIMIT, arm.name, tick, math.nan),)
        q_next = q_ik.copy()
        q_next[5] += new_sph.spin
        flange_world = self._world_pose(arm.placement, q_ik)
        found = safety_check(
            self.model,
            arm.q_cmd,
            q_next,
            flange_world,
            arm.frame,
            self.limits,
            self.dt,
            base_position=arm.placement.base_position,
            workspace=self.workspace,
            arm=arm.name,
            tick=tick,
        )
        if found:
            return tuple(found)
        arm.sph = new_sph
        arm.q_ik = q_ik
        arm.q_cmd = q_next
        return ()

    def teleport(self, arm_name: str, sph: SphericalState) -> None:
        """Place an arm exactly at a spherical state, servo at rest (no trace).

        Used by benchmarks to dock at a trajectory's first sample without
        recording an approach transient.
        """
        arm = self.arms[arm_name]
        target_world = flange_pose(arm.frame, sph)
        target_base = self._base_target(arm.placement, target_world)
        q_ik = inverse_kinematics(self.model, arm.q_ik, target_base)
        q = q_ik.copy()
        q[5] += sph.spin
        arm.sph = sph
        arm.q_ik = q_ik
        arm.q_cmd = q.copy()
        arm.q_cmd_prev = q.copy()
        arm.robot = replace(
            RobotState.at_rest(q), grasp=sph.grasp, spin_offset=sph.spin,
            tick=self.tick_count, time=self.tick_count * self.dt,
        )


# -- replay -------------------------------------------------------------------


@dataclass(frozen=True)
class ReplayResult:
    rows: tuple[TraceRow, ...]
    truncated: bool
    reason: str | None
    events: tuple[SafetyEvent, ...]


def _vertex_speed_limits(samples: np.ndarray, cruise: float, accel: float,
                         deviation: float) -> np.ndarray:
    """Per-vertex speed caps from junction angles (centripetal bound)."""
    n = len(samples)
    caps = np.full(n, cruise)
    caps[0] = 0.0
    caps[-1] = 0.0
    seg = np.diff(samples, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    for i in range(1, n - 1):
        if seg_len[i - 1] < 1e-12 or seg_len[i] < 1e-12:
            caps[i] = 0.0
            continue
        cosang = float(np.dot(seg[i - 1], seg[i]) / (seg_len[i - 1] * seg_len[i]))
        cosang = max(-1.0, min(1.0, cosang))
        half = math.sqrt(max(0.0, (1.0 + cosang) / 2.0))  # sin of half the included angle
        if half >= 1.0 - 1e-12:
            continue
        vj = math.sqrt(accel * deviation * half / (1.0 - half))
        caps[i] = min(cruise, vj)
    # forward/backward acceleration passes
    for i in range(1, n):
        caps[i] = min(caps[i], math.sqrt(caps[i - 1] ** 2 + 2.0 * accel * seg_len[i - 1]))
    for i in range(n - 2, -1, -1):
        caps[i] = min(caps[i], math.sqrt(caps[i + 1] ** 2 + 2.0 * accel * seg_len[i]))
    return caps


def _profile_positions(samples: np.ndarray, dt: float, cruise: float, accel: float,
                       deviation: float) -> np.ndarray:
    """Per-tick desired positions walking the polyline with a trapezoid profile."""
    caps = _vertex_speed_limits(samples, cruise, accel, deviation)
    seg = np.diff(samples, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    points = []
    i = 0  # current segment
    s = 0.0  # distance along segment i
    while i < len(seg):
        if seg_len[i] < 1e-12:
            i += 1
            continue
        v_in, v_out, length = caps[i], caps[i + 1], seg_len[i]
        v = min(
            cruise,
            math.sqrt(v_in * v_in + 2.0 * accel * s),
            math.sqrt(max(v_out * v_out + 2.0 * accel * (length - s), 0.0)),
        )
        step = max(v, accel * dt) * dt
        s += step
        while i < len(seg) and s >= seg_len[i] - 1e-12:
            s -= seg_len[i]
            i += 1
        if i >= len(seg):
            break
        points.append(samples[i] + seg[i] * (s / seg_len[i]))
    points.append(samples[-1])
    return np.asarray(points)


def replay(
    twin: DigitalTwin,
    arm: str,
    samples: np.ndarray,
    *,
    cruise: float = 0.012,
    accel: float = 0.025,
    deviation: float = 5.0e-5,
    settle_ticks: int = 50,
) -> ReplayResult:
    """Drive ``arm``'s tool tip along ``samples`` and trace every tick.

    The arm is docked at the first sample (teleported, servo at rest), then
    the tip walks the polyline at ``cruise`` m/s, slowing into sharp corners
    (junction speed from ``accel`` and the ``deviation`` tolerance).  Each
    tick converts the next desired tip point into a spherical command and
    steps the whole twin.  The trace records the commanded ("desired") and
    measured tip, tracking and fulcrum errors in mm, and the flags bitmask.
    Unreachable or clamped waypoints truncate the trace with a reason.
    """
    samples = np.asarray(samples, dtype=float)
    a = twin.arms[arm]
    hole = a.frame.hole
    span0 = np.linalg.norm(samples[0] - hole)
    state0 = spherical_from_position(
        a.frame, hole + (a.frame.tool_length - span0) * (hole - samples[0]) / span0
    )
    twin.teleport(arm, replace(state0, spin=a.sph.spin, grasp=a.sph.grasp))

    desired_stream = _profile_positions(samples, twin.dt, cruise, accel, deviation)
    rows: list[TraceRow] = []
    truncated = False
    reason: str | None = None
    all_events: list[SafetyEvent] = []
    for k in range(len(desired_stream) + settle_ticks):
        desired = desired_stream[min(k, len(desired_stream) - 1)]
        d_tip = desired - twin.commanded_tip(arm)
        try:
            cmd = tip_delta_to_command(a.frame, a.sph, d_tip)
        except RcmTwinError as exc:
            truncated, reason = True, f"command synthesis failed: {exc}"
            break
        snap = twin.tick({arm: cmd})[arm]
        track_mm = float(np.linalg.norm(snap.tip - desired)) * 1000.0
        rows.append(TraceRow(snap.tick, snap.time_s, arm, snap.tip.copy(), desired.copy(),
                             track_mm, snap.rcm_error_mm, snap.flags))
        if snap.events:
            all_events.extend(snap.events)
        if snap.hold:
            truncated, reason = True, f"safety hold: {snap.events[0].kind.value}"
            break
        if snap.flags & FLAG_WORKSPACE_CLAMP:
            truncated, reason = True, "workspace limit clamped the commanded state"
            break
    return ReplayResult(tuple(rows), truncated, reason, tuple(all_events))


def trace_to_csv(rows, path_or_buf) -> None:
    """Write trace rows with the documented CSV header."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    handle = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        writer = csv.writer(handle)
        writer.writerow(TRACE_HEADER.split(","))
        for r in rows:
            writer.writerow([
                r.tick, f"{r.time_s:.6f}", r.arm,
                f"{r.tip[0]:.9f}", f"{r.tip[1]:.9f}", f"{r.tip[2]:.9f}",
                f"{r.desired[0]:.9f}", f"{r.desired[1]:.9f}", f"{r.desired[2]:.9f}",
                f"{r.track_err_mm:.6f}", f"{r.rcm_err_mm:.6f}", r.flags,
            ])
    finally:
        if own:
            handle.close()
