"""Digital twin of a fulcrum-constrained laparoscopy training robot.

A two-arm 6-DOF manipulator simulator whose tools pivot through fixed entry
holes: spherical teleoperation commands, seeded inverse kinematics, a
lookahead joint servo, per-tick safety guards, trajectory benchmarks with
error reports, and a wall-clock network service speaking a newline-JSON
protocol for live consoles.
"""

from .bench import (
    ConeParams,
    ErrorReport,
    PyramidParams,
    ReferenceTrajectory,
    evaluate,
    gen_truncated_cone,
    gen_truncated_pyramid,
    run_benchmark,
)
from .client import TwinClient
from .config import ArmPlacement, Workspace, load_robot_model, load_workspace
from .errors import (
    DegenerateCalibrationError,
    DegenerateDirectionError,
    FulcrumMisalignmentError,
    InvalidTrajectoryError,
    JointLimitError,
    ProtocolDecodeError,
    RcmTwinError,
    ToolRetractedError,
    UndefinedDirectionError,
    UnreachableTargetError,
)
from .kinematics import (
    Pose,
    RobotModel,
    Twist,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    pose_delta,
    solve_joint_velocities,
    tcp_calibrate_4point,
    tool_tip,
)
from .protocol import (
    COMMAND_KINDS,
    PROTOCOL_VERSION,
    SESSION_VERBS,
    CommandMessage,
    decode_command,
    decode_line,
    encode,
    make_key_command,
    make_nack,
    make_session_command,
    make_state,
    make_stylus_command,
    make_welcome,
)
from .rcm import (
    FulcrumFrame,
    RcmCommand,
    SphericalState,
    WorkspaceLimits,
    flange_orientation,
    flange_pose,
    flange_position,
    radial_direction,
    rcm_error,
    record_fulcrum,
    spherical_from_position,
    step_spherical,
    tip_delta_to_command,
    tip_position,
)
from .safety import (
    FLAG_COLLISION,
    FLAG_CONFIGURATION,
    FLAG_HOLD,
    FLAG_JOINT_LIMIT,
    FLAG_RCM,
    FLAG_SINGULARITY,
    FLAG_SPEED,
    FLAG_UNREACHABLE,
    FLAG_WORKSPACE_CLAMP,
    SafetyEvent,
    SafetyKind,
    SafetyLimits,
    branch_signature,
    check as safety_check,
    flags_from_events,
)
from .service import ServiceConfig, TwinService
from .servo import DEFAULT_CONTROL_RATE, DEFAULT_LOOKAHEAD, RobotState, ServoConfig, servo_step
from .teleop import (
    KEYMAP,
    SPEED_LEVEL_DEFAULT,
    SPEED_LEVELS,
    Action,
    BaseRates,
    DeadZoneConfig,
    SpeedScale,
    StylusSample,
    TeleopConfig,
    TeleopIntent,
    TeleopSession,
    dead_zone_filter,
    free_state,
    intent_to_command,
    lateral_directions,
    map_key,
)
from .twin import ArmSnapshot, DigitalTwin, ReplayResult, TraceRow, replay, trace_to_csv

__version__ = "0.1.0"
