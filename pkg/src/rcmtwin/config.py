"""Configuration loading: robot model and workspace description.

Two JSON files describe a deployment.  ``robot.json`` holds the arm's DH
table, joint/velocity limits and tool-tip offset.  ``workspace.json`` holds
the training-box geometry, pivot holes, tool dimensions, spherical workspace
limits and the per-arm placement (base pose, home joints, docked spherical
coordinates).  Both loaders fall back to the packaged defaults when no path
is given.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .kinematics import N_JOINTS, RobotModel

ARM_NAMES = ("left", "right")


def _read_json(path, default_name: str) -> dict:
    if path is None:
        source = resources.files("rcmtwin.data").joinpath(default_name)
        return json.loads(source.read_text())
    return json.loads(Path(path).read_text())


def load_robot_model(path: str | Path | None = None) -> RobotModel:
    """RobotModel from a robot.json file (packaged default when path is None)."""
    raw = _read_json(path, "robot.json")
    try:
        return RobotModel(
            dh=np.array(raw["dh"], dtype=float),
            joint_limits=np.array(raw["joint_limits"], dtype=float),
            velocity_limits=np.array(raw["velocity_limits"], dtype=float),
            tcp_offset=np.array(raw["tcp_offset"], dtype=float),
        )
    except KeyError as exc:
        raise ValueError(f"robot config is missing key {exc}") from exc


@dataclass(frozen=True)
class ArmPlacement:
    """Where one arm sits in the world and how it docks at its hole."""

    base_position: np.ndarray
    base_yaw: float
    hole: int
    q_home: np.ndarray
    theta0: float
    phi0: float
    r0: float

    def __post_init__(self):
        base = np.asarray(self.base_position, dtype=float).reshape(3).copy()
        q = np.asarray(self.q_home, dtype=float).reshape(N_JOINTS).copy()
        base.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "base_position", base)
        object.__setattr__(self, "q_home", q)

    def world_from_base(self) -> np.ndarray:
        out = np.eye(4)
        c, s = math.cos(self.base_yaw), math.sin(self.base_yaw)
        out[:3, :3] = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        out[:3, 3] = self.base_position
        return out


@dataclass(frozen=True)
class Workspace:
    """Training-box geometry and spherical workspace limits (SI units)."""

    box_center: np.ndarray
    box_dims: np.ndarray
    holes: np.ndarray
    hole_diameter: float
    tool_diameter: float
    tool_length: float
    theta_limit: float
    r_limits: tuple[float, float]
    arms: dict[str, ArmPlacement] = field(default_factory=dict)

    def __post_init__(self):
        center = np.asarray(self.box_center, dtype=float).reshape(3).copy()
        dims = np.asarray(self.box_dims, dtype=float).reshape(3).copy()
        holes = np.asarray(self.holes, dtype=float).reshape(-1, 3).copy()
        if not (0.0 < self.theta_limit < math.pi / 2):
            raise ValueError("theta_limit must lie in (0, pi/2)")
        r_lo, r_hi = self.r_limits
        if not (0.0 < r_lo < r_hi < self.tool_length):
            raise ValueError("r_limits must satisfy 0 < min < max < tool_length")
        if self.tool_diameter >= self.hole_diameter:
            raise ValueError("tool must be thinner than the hole")
        for arr in (center, dims, holes):
            arr.flags.writeable = False
        object.__setattr__(self, "box_center", center)
        object.__setattr__(self, "box_dims", dims)
        object.__setattr__(self, "holes", holes)
        object.__setattr__(self, "r_limits", (float(r_lo), float(r_hi)))

    def hole_position(self, index: int) -> np.ndarray:
        return self.holes[index]


def load_workspace(path: str | Path | None = None) -> Workspace:
    """Workspace from a workspace.json file (packaged default when path is None)."""
    raw = _read_json(path, "workspace.json")
    try:
        arms = {}
        for name, spec in raw.get("arms", {}).items():
            arms[name] = ArmPlacement(
                base_position=np.array(spec["base_position"], dtype=float),
                base_yaw=float(spec.get("base_yaw", 0.0)),
                hole=int(spec["hole"]),
                q_home=np.array(spec["q_home"], dtype=float),
                theta0=float(spec["theta0"]),
                phi0=float(spec["phi0"]),
                r0=float(spec["r0"]),
            )
        return Workspace(
            box_center=np.array(raw["box_center"], dtype=float),
            box_dims=np.array(raw["box_dims"], dtype=float),
            holes=np.array(raw["holes"], dtype=float),
            hole_diameter=float(raw["hole_diameter"]),
            tool_diameter=float(raw["tool_diameter"]),
            tool_length=float(raw["tool_length"]),
            theta_limit=float(raw["theta_limit"]),
            r_limits=(float(raw["r_limits"][0]), float(raw["r_limits"][1])),
            arms=arms,
        )
    except KeyError as exc:
        raise ValueError(f"workspace config is missing key {exc}") from exc
