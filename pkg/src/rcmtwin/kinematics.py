"""Kinematics for a 6-DOF serial arm described by a standard DH table.

Positions are metres, angles radians.  Orientations use ZYX Euler angles
(roll about x, pitch about y, yaw about z, composed R = Rz(yaw) Ry(pitch)
Rx(roll)) or 3x3 rotation matrices.  Twists stack [vx vy vz wx wy wz].

The Jacobian is computed numerically by central finite differences on the
forward kinematics; angular rows come from the quaternion of the rotation
difference.  Inverse kinematics is resolved-rate iteration from a seed,
falling back to damped least squares near singularities, which keeps the
solution on the seed's configuration branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateCalibrationError,
    JointLimitError,
    UnreachableTargetError,
)

N_JOINTS = 6


# ---------------------------------------------------------------------------
# rotation helpers


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix for ZYX Euler angles: R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def matrix_to_rpy(rot: np.ndarray) -> tuple[float, float, float]:
    """ZYX Euler angles (roll, pitch, yaw) of a rotation matrix.

    Well defined away from pitch = +-pi/2; at the gimbal boundary roll is
    pinned to 0 and yaw absorbs the remaining rotation.
    """
    sp = -float(rot[2, 0])
    sp = max(-1.0, min(1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) > 1.0 - 1e-12:
        # gimbal: only roll +- yaw observable
        return 0.0, pitch, math.atan2(-rot[0, 1], rot[1, 1])
    roll = math.atan2(rot[2, 1], rot[2, 2])
    yaw = math.atan2(rot[1, 0], rot[0, 0])
    return roll, pitch, yaw


def quat_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion [w x y z] of a rotation matrix (Shepperd's method)."""
    m00, m01, m02 = rot[0]
    m10, m11, m12 = rot[1]
    m20, m21, m22 = rot[2]
    tr = m00 + m11 + m22
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s])
    elif m00 >= m11 and m00 >= m22:
        s = math.sqrt(1.0 + m00 - m11 - m22) * 2.0
        q = np.array([(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s])
    elif m11 >= m22:
        s = math.sqrt(1.0 + m11 - m00 - m22) * 2.0
        q = np.array([(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s])
    else:
        s = math.sqrt(1.0 + m22 - m00 - m11) * 2.0
        q = np.array([(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s])
    return q / np.linalg.norm(q)


def rotation_vector(rot: np.ndarray) -> np.ndarray:
    """Axis-angle vector (axis * angle, angle in [0, pi]) via the quaternion."""
    q = quat_from_matrix(rot)
    if q[0] < 0.0:
        q = -q
    w, v = q[0], q[1:]
    s = float(np.linalg.norm(v))
    if s < 1e-12:
        return 2.0 * v  # small angle: sin(a/2) ~ a/2
    angle = 2.0 * math.atan2(s, w)
    return v * (angle / s)


# ---------------------------------------------------------------------------
# pose and model types


@dataclass(frozen=True)
class Pose:
    """Rigid pose: position (3,) in metres plus a 3x3 rotation matrix."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3).copy()
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3).copy()
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > 1e-9 or abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError(f"rotation is not orthonormal (residual {err:.2e})")
        pos.flags.writeable = False
        rot.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def from_euler(cls, position, roll: float, pitch: float, yaw: float) -> "Pose":
        return cls(np.asarray(position, dtype=float), rpy_to_matrix(roll, pitch, yaw))

    @classmethod
    def from_matrix(cls, transform: np.ndarray) -> "Pose":
        transform = np.asarray(transform, dtype=float)
        return cls(transform[:3, 3], transform[:3, :3])

    @property
    def euler(self) -> tuple[float, float, float]:
        return matrix_to_rpy(self.rotation)

    @property
    def transform(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.position
        return out


class Twist(NamedTuple):
    """Spatial velocity: linear (3,) m/s and angular (3,) rad/s."""

    linear: np.ndarray
    angular: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass(frozen=True)
class RobotModel:
    """Standard DH model of a 6-joint arm.

    dh rows are (a, d, alpha, theta_offset); joint_limits is (6, 2) with
    min < max per row; velocity_limits (6,) positive; tcp_offset is the tool
    tip expressed in the flange frame.
    """

    dh: np.ndarray
    joint_limits: np.ndarray
    velocity_limits: np.ndarray
    tcp_offset: np.ndarray

    def __post_init__(self):
        dh = np.asarray(self.dh, dtype=float).reshape(N_JOINTS, 4).copy()
        lim = np.asarray(self.joint_limits, dtype=float).reshape(N_JOINTS, 2).copy()
        vel = np.asarray(self.velocity_limits, dtype=float).reshape(N_JOINTS).copy()
        tcp = np.asarray(self.tcp_offset, dtype=float).reshape(3).copy()
        if not np.all(lim[:, 0] < lim[:, 1]):
            raise ValueError("joint_limits rows must satisfy min < max")
        if not np.all(vel > 0.0):
            raise ValueError("velocity_limits must be positive")
        for arr in (dh, lim, vel, tcp):
            if not np.all(np.isfinite(arr)):
                raise ValueError("robot model parameters must be finite")
            arr.flags.writeable = False
        object.__setattr__(self, "dh", dh)
        object.__setattr__(self, "joint_limits", lim)
        object.__setattr__(self, "velocity_limits", vel)
        object.__setattr__(self, "tcp_offset", tcp)

    def inside_limits(self, q: np.ndarray, margin: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(
            np.all(q >= self.joint_limits[:, 0] + margin)
            and np.all(q <= self.joint_limits[:, 1] - margin)
        )


# ---------------------------------------------------------------------------
# forward kinematics


def _dh_transforms(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Per-joint DH matrices for a batch of configurations.

    q has shape (..., 6); the result has shape (..., 6, 4, 4).
    """
    a = model.dh[:, 0]
    d = model.dh[:, 1]
    alpha = model.dh[:, 2]
    theta = q + model.dh[:, 3]
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    ca = np.broadcast_to(ca, theta.shape)
    sa = np.broadcast_to(sa, theta.shape)
    out = np.zeros(theta.shape + (4, 4))
    out[..., 0, 0] = ct
    out[..., 0, 1] = -st * ca
    out[..., 0, 2] = st * sa
    out[..., 0, 3] = a * ct
    out[..., 1, 0] = st
    out[..., 1, 1] = ct * ca
    out[..., 1, 2] = -ct * sa
    out[..., 1, 3] = a * st
    out[..., 2, 1] = sa
    out[..., 2, 2] = ca
    out[..., 2, 3] = d
    out[..., 3, 3] = 1.0
    return out

def _fk_batch(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Flange transforms (..., 4, 4) for configurations q (..., 6)."""
    steps = _dh_transforms(model, np.asarray(q, dtype=float))
    t = steps[..., 0, :, :]
    for k in range(1, N_JOINTS):
        t = t @ steps[..., k, :, :]
    return t


def _fk_transform(model: RobotModel, q: np.ndarray) -> np.ndarray:
    return _fk_batch(model, np.asarray(q, dtype=float).reshape(N_JOINTS))


def forward_kinematics(model: RobotModel, q) -> Pose:
    """Flange pose in the arm base frame.

    Deterministic: identical inputs produce bit-identical poses.  Apply
    ``model.tcp_offset`` afterwards to obtain the tool-tip point.
    """
    return Pose.from_matrix(_fk_transform(model, q))


def tool_tip(model: RobotModel, flange: Pose) -> np.ndarray:
    """Tool-tip point for a flange pose, using the model's tcp offset."""
    return flange.position + flange.rotation @ model.tcp_offset


# ---------------------------------------------------------------------------
# differential kinematics


def jacobian(model: RobotModel, q, step: float = 1e-6) -> np.ndarray:
    """6x6 flange Jacobian by central finite differences (step in rad).

    Rows 0-2 map joint rates to linear velocity, rows 3-5 to angular
    velocity; column k is the twist produced by unit rate of joint k.
    """
    q = np.asarray(q, dtype=float).reshape(N_JOINTS)
    probes = np.repeat(q[None, :], 2 * N_JOINTS, axis=0)
    for k in range(N_JOINTS):
        probes[2 * k, k] += step
        probes[2 * k + 1, k] -= step
    frames = _fk_batch(model, probes)
    jac = np.empty((6, 6))
    inv = 0.5 / step
    for k in range(N_JOINTS):
        plus, minus = frames[2 * k], frames[2 * k + 1]
        jac[:3, k] = (plus[:3, 3] - minus[:3, 3]) * inv
        jac[3:, k] = rotation_vector(plus[:3, :3] @ minus[:3, :3].T) * inv
    return jac


def pose_delta(pose_from: Pose, pose_to: Pose, dt: float) -> Twist:
    """Twist that carries pose_from to pose_to over dt seconds.

    The angular part is the axis-angle vector of the rotation difference
    (computed through its quaternion), divided by dt.
    """
    if not (dt > 0.0):
        raise ValueError("dt must be positive")
    linear = (pose_to.position - pose_from.position) / dt
    angular = rotation_vector(pose_to.rotation @ pose_from.rotation.T) / dt
    return Twist(linear, angular)


class VelocitySolution(NamedTuple):
    """Joint rates plus how they were obtained."""

    qd: np.ndarray
    damped: bool
    sigma_min: float


def solve_joint_velocities(
    jac: np.ndarray,
    twist,
    *,
    sigma_threshold: float = 1e-4,
    damping: float = 0.01,
) -> VelocitySolution:
    """Joint rates realising a flange twist: qd = J^-1 v.

    When the smallest singular value drops below ``sigma_threshold`` the
    solve switches to damped least squares (lambda = ``damping``) and the
    result is flagged as damped.
    """
    vec = twist.vector if isinstance(twist, Twist) else np.asarray(twist, dtype=float)
    vec = vec.reshape(6)
    if not np.all(np.isfinite(vec)):
        raise ValueError("twist must be finite")
    u, sigma, vt = np.linalg.svd(np.asarray(jac, dtype=float).reshape(6, 6))
    s_min = float(sigma[-1])
    projected = u.T @ vec
    if s_min < sigma_threshold:
        gains = sigma / (sigma * sigma + damping * damping)
        return VelocitySolution(vt.T @ (gains * projected), True, s_min)
    return VelocitySolution(vt.T @ (projected / sigma), False, s_min)


# ---------------------------------------------------------------------------
# inverse kinematics


def inverse_kinematics(
    model: RobotModel,
    q_seed,
    target: Pose,
    *,
    pos_tol: float = 1e-8,
    rot_tol: float = 1e-8,
    max_iter: int = 200,
    max_step: float = 0.5,
) -> np.ndarray:
    """Joint angles reaching ``target``, continued from ``q_seed``.

    Resolved-rate iteration: each step solves J qd = pose error and adds it
    (capped at ``max_step`` rad per joint), so the answer stays on the
    seed's configuration branch.  Raises UnreachableTargetError when the
    error does not fall below tolerance within ``max_iter`` steps and
    JointLimitError when the converged solution violates joint limits.
    """
    q = np.asarray(q_seed, dtype=float).reshape(N_JOINTS).copy()
    if not model.inside_limits(q):
        raise ValueError("q_seed violates joint limits")
    for _ in range(max_iter + 1):
        frame = _fk_transform(model, q)
        dp = target.position - frame[:3, 3]
        dw = rotation_vector(target.rotation @ frame[:3, :3].T)
        if np.linalg.norm(dp) < pos_tol and np.linalg.norm(dw) < rot_tol:
            if not model.inside_limits(q):
                raise JointLimitError(
                    f"IK solution violates joint limits: q={np.round(q, 4)}"
                )
            return q
        solution = solve_joint_velocities(jacobian(model, q), np.concatenate([dp, dw]))
        step = solution.qd
        worst = float(np.abs(step).max())
        if worst > max_step:
            step = step * (max_step / worst)
        q = q + step
    raise UnreachableTargetError(
        f"no convergence after {max_iter} iterations "
        f"(remaining position error {np.linalg.norm(dp):.3e} m)"
    )


# ---------------------------------------------------------------------------
# tool-tip calibration


class TcpCalibration(NamedTuple):
    """Tool offset in the flange frame plus the RMS pivot-point spread."""

    offset: np.ndarray
    residual_rms: float


def tcp_calibrate_4point(poses: Sequence[Pose]) -> TcpCalibration:
    """Tool-centre-point offset from four flange poses sharing one tip point.

    With p_i + R_i t identical for all i, pairwise differences give the
    linear system (R_i - R_j) t = p_j - p_i, solved in least squares.
    Raises DegenerateCalibrationError when the stacked system is rank
    deficient (orientations too similar or sharing a rotation axis).
    """
    if len(poses) != 4:
        raise ValueError("exactly four poses are required")
    rows = []
    rhs = []
    for i in range(4):
        for j in range(i + 1, 4):
            rows.append(poses[i].rotation - poses[j].rotation)
            rhs.append(poses[j].position - poses[i].position)
    a = np.vstack(rows)
    b = np.concatenate(rhs)
    sigma = np.linalg.svd(a, compute_uv=False)
    if sigma[2] < 1e-8 * max(1.0, float(sigma[0])):
        raise DegenerateCalibrationError(
            f"calibration system is rank deficient (singular values {sigma[:3]})"
        )
    offset, *_ = np.linalg.lstsq(a, b, rcond=None)
    tips = np.array([p.position + p.rotation @ offset for p in poses])
    spread = tips - tips.mean(axis=0)
    residual = float(np.sqrt(np.mean(np.sum(spread * spread, axis=1))))
    return TcpCalibration(offset, residual)
