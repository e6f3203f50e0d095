"""Reference tip trajectories and tracking-error reports.

Two benchmark shapes sweep the tool tip about the docked tool axis, deeper
and wider as they go: a spiral on the wall of a truncated cone, and square
loops of linearly growing side joined by straight transitions.  Both are
emitted as densely sampled polylines (consecutive spacing at or below
``SAMPLE_SPACING_MAX``, the distance one control period covers at
``MAX_TIP_SPEED``), replayed through the digital twin, and reduced by
`evaluate` to the tracking / pivot-error report the acceptance tests check.

The CLI (``rcmtwin-bench run``) replays one shape, prints the report, and
exits nonzero when any error bound is exceeded or the run was truncated.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from .config import load_robot_model, load_workspace
from .errors import InvalidTrajectoryError
from .rcm import FulcrumFrame, WorkspaceLimits, radial_direction
from .servo import DEFAULT_CONTROL_RATE, ServoConfig
from .twin import DigitalTwin, ReplayResult, replay, trace_to_csv

__all__ = [
    "MAX_TIP_SPEED",
    "SAMPLE_SPACING_MAX",
    "CRUISE_SPEED",
    "ACCEL",
    "JUNCTION_DEVIATION",
    "TRACKING_RMSE_BOUND_MM",
    "TRACKING_MAX_BOUND_MM",
    "RCM_RMSE_BOUND_MM",
    "RCM_MAX_BOUND_MM",
    "ConeParams",
    "PyramidParams",
    "ReferenceTrajectory",
    "ErrorReport",
    "BenchmarkRun",
    "axis_basis",
    "gen_truncated_cone",
    "gen_truncated_pyramid",
    "evaluate",
    "run_benchmark",
    "main",
]

# Hard cap on commanded tip speed; one 125 Hz period at this speed bounds
# the waypoint spacing every generator must respect.
MAX_TIP_SPEED = 0.1  # m/s
SAMPLE_SPACING_MAX = MAX_TIP_SPEED / DEFAULT_CONTROL_RATE  # 0.8 mm

# Replay speed profile defaults: cruise speed, acceleration, and the
# corner-rounding tolerance that sets junction speeds at sharp turns.
CRUISE_SPEED = 0.016  # m/s
ACCEL = 0.08  # m/s^2
JUNCTION_DEVIATION = 5.0e-5  # m

# Error bounds a benchmark run must meet (all in mm).
TRACKING_RMSE_BOUND_MM = 0.1
TRACKING_MAX_BOUND_MM = 0.25
RCM_RMSE_BOUND_MM = 0.002
RCM_MAX_BOUND_MM = 0.005


@dataclass(frozen=True)
class ConeParams:
    """Spiral on a truncated-cone wall about the docked tool axis.

    Radii and depths are measured perpendicular to / along the docked axis,
    on the inside of the training box.  Defaults fit the 30 x 20 x 15 cm box
    with margin.
    """

    top_radius: float = 0.015
    bottom_radius: float = 0.025
    depth_top: float = 0.060
    depth_bottom: float = 0.100
    turns: int = 3
    samples_per_turn: int = 200

    def __post_init__(self):
        if min(self.top_radius, self.bottom_radius) < 0.0:
            raise InvalidTrajectoryError("radii must be non-negative")
        if not 0.0 < self.depth_top <= self.depth_bottom:
            raise InvalidTrajectoryError("need 0 < depth_top <= depth_bottom")
        if self.turns < 1 or self.samples_per_turn < 8:
            raise InvalidTrajectoryError("need turns >= 1 and samples_per_turn >= 8")


@dataclass(frozen=True)
class PyramidParams:
    """Square loops of linearly growing side, stacked along the docked axis."""

    top_side: float = 0.020
    bottom_side: float = 0.036
    depth_top: float = 0.060
    depth_bottom: float = 0.100
    loops: int = 3
    samples_per_side: int = 64

    def __post_init__(self):
        if min(self.top_side, self.bottom_side) < 0.0:
            raise InvalidTrajectoryError("side lengths must be non-negative")
        if not 0.0 < self.depth_top <= self.depth_bottom:
            raise InvalidTrajectoryError("need 0 < depth_top <= depth_bottom")
        if self.loops < 1 or self.samples_per_side < 4:
            raise InvalidTrajectoryError("need loops >= 1 and samples_per_side >= 4")


@dataclass(frozen=True)
class ReferenceTrajectory:
    kind: str
    samples: np.ndarray  # (N, 3) desired tip positions, metres, world frame
    params: ConeParams | PyramidParams

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)


def axis_basis(frame: FulcrumFrame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed basis of the docked tool axis: (axis, rise, swing).

    ``axis`` points from the hole towards the docked flange; ``rise`` is the
    in-plane unit vector towards +z (so a zero-angle sample lies in the
    docking plane), and ``swing`` completes the triad.
    """
    u0 = radial_direction(frame.theta0, frame.phi0)
    e1 = np.array([0.0, 0.0, 1.0]) - u0[2] * u0
    n = float(np.linalg.norm(e1))
    if n < 1e-9:  # docked straight up: any horizontal direction works
        e1 = np.array([1.0, 0.0, 0.0])
    else:
        e1 = e1 / n
    return u0, e1, np.cross(u0, e1)


def _validate(kind: str, samples: np.ndarray, frame: FulcrumFrame,
              limits: WorkspaceLimits | None) -> None:
    spacing = np.linalg.norm(np.diff(samples, axis=0), axis=1)
    if spacing.size and float(spacing.max()) > SAMPLE_SPACING_MAX + 1e-12:
        raise InvalidTrajectoryError(
            f"{kind}: sample spacing {spacing.max():.4g} m exceeds "
            f"{SAMPLE_SPACING_MAX:.4g} m; increase the sample count"
        )
    offsets = frame.hole[None, :] - samples
    spans = np.linalg.norm(offsets, axis=1)
    if float(spans.min()) < 1e-6:
        raise InvalidTrajectoryError(f"{kind}: a sample coincides with the pivot hole")
    r = frame.tool_length - spans
    if float(r.min()) <= 0.0:
        raise InvalidTrajectoryError(
            f"{kind}: sample deeper than the tool length (needs depth < "
            f"{frame.tool_length:.3f} m)"
        )
    theta = np.arcsin(np.clip(offsets[:, 2] / spans, -1.0, 1.0))
    if limits is not None:
        if float(np.abs(theta).max()) > limits.theta_limit + 1e-9:
            raise InvalidTrajectoryError(
                f"{kind}: sample tilt {np.abs(theta).max():.3f} rad exceeds the "
                f"workspace cone limit {limits.theta_limit:.3f} rad"
            )
        if float(r.min()) < limits.r_min - 1e-9 or float(r.max()) > limits.r_max + 1e-9:
            raise InvalidTrajectoryError(
                f"{kind}: outside tool length would leave [{limits.r_min}, "
                f"{limits.r_max}] m"
            )


def gen_truncated_cone(
    params: ConeParams | None = None,
    frame: FulcrumFrame | None = None,
    limits: WorkspaceLimits | None = None,
) -> ReferenceTrajectory:
    """Spiral from (depth_top, top_radius) to (depth_bottom, bottom_radius).

    The sample at angle zero lies in the vertical plane of the docked axis;
    equal radii degenerate to a cylinder wall.  Raises
    InvalidTrajectoryError when a sample leaves the workspace (with
    ``limits``) or the spacing bound is violated.
    """
    params = params or ConeParams()
    if not isinstance(params, ConeParams):
        raise TypeError(f"expected ConeParams, got {type(params).__name__}")
    if frame is None:
        raise ValueError("a fulcrum frame is required")
    u0, e1, e2 = axis_basis(frame)
    n = params.turns * params.samples_per_turn
    s = np.linspace(0.0, 1.0, n + 1)
    angle = 2.0 * math.pi * params.turns * s
    rho = params.top_radius + (params.bottom_radius - params.top_radius) * s
    depth = params.depth_top + (params.depth_bottom - params.depth_top) * s
    samples = (
        frame.hole[None, :]
        - depth[:, None] * u0[None, :]
        + rho[:, None] * (np.cos(angle)[:, None] * e1[None, :]
                          + np.sin(angle)[:, None] * e2[None, :])
    )
    _validate("cone", samples, frame, limits)
    return ReferenceTrajectory("cone", samples, params)


def _loop_corners(frame: FulcrumFrame, params: PyramidParams, k: int,
                  basis) -> list[np.ndarray]:
    u0, e1, e2 = basis
    f = k / max(params.loops - 1, 1)
    side = params.top_side + (params.bottom_side - params.top_side) * f
    depth = params.depth_top + (params.depth_bottom - params.depth_top) * f
    half = side / math.sqrt(2.0)  # square vertices sit on the basis axes
    center = frame.hole - depth * u0
    return [center + half * v for v in (e1, e2, -e1, -e2)]


def _subdivide(a: np.ndarray, b: np.ndarray, count: int,
               include_start: bool) -> list[np.ndarray]:
    start = 0 if include_start else 1
    return [a + (b - a) * (t / count) for t in range(start, count + 1)]


def gen_truncated_pyramid(
    params: PyramidParams | None = None,
    frame: FulcrumFrame | None = None,
    limits: WorkspaceLimits | None = None,
) -> ReferenceTrajectory:
    """Closed square loops at increasing depth, joined by straight runs.

    Each loop has 4 * samples_per_side + 1 points (last equals first);
    transitions between consecutive loops are subdivided to the same
    spacing bound as the sides.
    """
    params = params or PyramidParams()
    if not isinstance(params, PyramidParams):
        raise TypeError(f"expected PyramidParams, got {type(params).__name__}")
    if frame is None:
        raise ValueError("a fulcrum frame is required")
    basis = axis_basis(frame)
    pts: list[np.ndarray] = []
    prev_close: np.ndarray | None = None
    for k in range(params.loops):
        corners = _loop_corners(frame, params, k, basis)
        if prev_close is not None:
            hop = float(np.linalg.norm(corners[0] - prev_close))
            count = max(1, math.ceil(hop / (0.7 * SAMPLE_SPACING_MAX)))
            pts.extend(_subdivide(prev_close, corners[0], count, include_start=False)[:-1])
        for i in range(4):
            a, b = corners[i], corners[(i + 1) % 4]
            pts.extend(_subdivide(a, b, params.samples_per_side,
                                  include_start=(i == 0)))
        prev_close = corners[0]
    samples = np.asarray(pts)
    _validate("pyramid", samples, frame, limits)
    return ReferenceTrajectory("pyramid", samples, params)


# -- error reports --------------------------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    """Max / RMS tracking and pivot errors over one replayed run (mm)."""

    tracking_max_mm: float
    tracking_rmse_mm: float
    rcm_max_mm: float
    rcm_rmse_mm: float
    n_samples: int


def evaluate(rows) -> ErrorReport:
    """Reduce trace rows to max and root-mean-square errors, in mm."""
    rows = list(rows)
    if not rows:
        raise ValueError("cannot evaluate an empty trace")
    track = np.array([r.track_err_mm for r in rows], dtype=float)
    rcm = np.array([r.rcm_err_mm for r in rows], dtype=float)
    return ErrorReport(
        tracking_max_mm=float(track.max()),
        tracking_rmse_mm=float(math.sqrt(np.mean(track**2))),
        rcm_max_mm=float(rcm.max()),
        rcm_rmse_mm=float(math.sqrt(np.mean(rcm**2))),
        n_samples=len(rows),
    )


@dataclass(frozen=True)
class BenchmarkRun:
    shape: str
    arm: str
    trajectory: ReferenceTrajectory
    replay: ReplayResult
    report: ErrorReport
    runtime_s: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_dict(self) -> dict:
        d = {
            "shape": self.shape,
            "arm": self.arm,
            **asdict(self.report),
            "runtime_s": round(self.runtime_s, 3),
            "truncated": self.replay.truncated,
            "truncation_reason": self.replay.reason,
            "passed": self.passed,
            "failures": list(self.failures),
            "params": asdict(self.trajectory.params),
            "thresholds_mm": {
                "tracking_rmse": TRACKING_RMSE_BOUND_MM,
                "tracking_max": TRACKING_MAX_BOUND_MM,
                "rcm_rmse": RCM_RMSE_BOUND_MM,
                "rcm_max": RCM_MAX_BOUND_MM,
            },
        }
        return d


def _threshold_failures(report: ErrorReport, result: ReplayResult) -> tuple[str, ...]:
    fails = []
    if result.truncated:
        fails.append(f"run truncated: {result.reason}")
    pairs = (
        ("tracking_rmse_mm", report.tracking_rmse_mm, TRACKING_RMSE_BOUND_MM),
        ("tracking_max_mm", report.tracking_max_mm, TRACKING_MAX_BOUND_MM),
        ("rcm_rmse_mm", report.rcm_rmse_mm, RCM_RMSE_BOUND_MM),
        ("rcm_max_mm", report.rcm_max_mm, RCM_MAX_BOUND_MM),
    )
    for name, value, bound in pairs:
        if value > bound:
            fails.append(f"{name} {value:.4f} exceeds bound {bound}")
    return tuple(fails)


def run_benchmark(
    shape: str = "cone",
    *,
    twin: DigitalTwin | None = None,
    arm: str = "left",
    params: ConeParams | PyramidParams | None = None,
    cruise: float = CRUISE_SPEED,
    accel: float = ACCEL,
    deviation: float = JUNCTION_DEVIATION,
) -> BenchmarkRun:
    """Generate a shape for ``arm``'s docked frame, replay it, grade it."""
    twin = twin if twin is not None else DigitalTwin()
    frame = twin.frame(arm)
    if shape == "cone":
        traj = gen_truncated_cone(params, frame, twin.sph_limits)  # type: ignore[arg-type]
    elif shape == "pyramid":
        traj = gen_truncated_pyramid(params, frame, twin.sph_limits)  # type: ignore[arg-type]
    else:
        raise ValueError(f"unknown shape {shape!r} (expected 'cone' or 'pyramid')")
    t0 = time.perf_counter()
    result = replay(twin, arm, traj.samples, cruise=cruise, accel=accel,
                    deviation=deviation)
    runtime = time.perf_counter() - t0
    report = evaluate(result.rows)
    return BenchmarkRun(
        shape=shape,
        arm=arm,
        trajectory=traj,
        replay=result,
        report=report,
        runtime_s=runtime,
        failures=_threshold_failures(report, result),
    )


# -- CLI -------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcmtwin-bench",
        description="Replay a reference tip trajectory through the digital twin "
                    "and report tracking / pivot errors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="replay one benchmark shape")
    run.add_argument("--shape", choices=("cone", "pyramid"), required=True)
    run.add_argument("--config", metavar="WORKSPACE_JSON",
                     help="workspace layout (defaults to the packaged one)")
    run.add_argument("--robot", metavar="ROBOT_JSON",
                     help="robot model (defaults to the packaged one)")
    run.add_argument("--arm", choices=("left", "right"), default="left")
    run.add_argument("--out", metavar="REPORT_JSON", help="write the JSON report here")
    run.add_argument("--trace", metavar="TRACE_CSV",
                     help="write the per-tick trace here")
    run.add_argument("--cruise", type=float, default=CRUISE_SPEED,
                     help="cruise tip speed, m/s (default %(default)s)")
    run.add_argument("--accel", type=float, default=ACCEL,
                     help="tip acceleration, m/s^2 (default %(default)s)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    model = load_robot_model(args.robot)
    workspace = load_workspace(args.config)
    twin = DigitalTwin(model, workspace,
                       servo=ServoConfig(max_joint_vel=model.velocity_limits))
    try:
        run = run_benchmark(args.shape, twin=twin, arm=args.arm,
                            cruise=args.cruise, accel=args.accel)
    except InvalidTrajectoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    r = run.report
    print(f"shape={run.shape} arm={run.arm} samples={len(run.trajectory.samples)} "
          f"trace_rows={r.n_samples} runtime={run.runtime_s:.2f}s")
    print(f"tracking: rmse={r.tracking_rmse_mm:.4f} mm (bound {TRACKING_RMSE_BOUND_MM}), "
          f"max={r.tracking_max_mm:.4f} mm (bound {TRACKING_MAX_BOUND_MM})")
    print(f"pivot:    rmse={r.rcm_rmse_mm:.4f} mm (bound {RCM_RMSE_BOUND_MM}), "
          f"max={r.rcm_max_mm:.4f} mm (bound {RCM_MAX_BOUND_MM})")
    if args.trace:
        os.makedirs(os.path.dirname(os.path.abspath(args.trace)), exist_ok=True)
        trace_to_csv(run.replay.rows, args.trace)
        print(f"trace written to {args.trace}")
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w") as fh:
            json.dump(run.to_json_dict(), fh, indent=2)
        print(f"report written to {args.out}")
    if run.passed:
        print("PASS")
        return 0
    for f in run.failures:
        print(f"FAIL: {f}")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
