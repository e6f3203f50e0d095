"""Operator input translation: keys and stylus samples to per-tick commands.

Two input families produce the same `RcmCommand` increments:

* a 24-key keyboard layout (one hand per arm) where an action is active
  while its key is held — insertion, lateral tip motion, shaft rotation,
  grasping, and a per-arm speed ladder;
* 6-DOF stylus samples in rate-control style: displacement from an anchor
  pose beyond a dead zone commands tip velocity, twist commands shaft spin,
  the two buttons close/open the grasper, and both buttons together put the
  device in a free state that silences output and re-anchors on release.

Lateral directions are defined relative to the current insertion axis:
``into`` points down the shaft, ``left`` is horizontal and perpendicular to
it, and ``up`` completes the right-handed triad, so the mapping stays
intuitive wherever the tool points.  `TeleopSession` owns the per-arm event
queues (bounded, oldest dropped on overflow) and folds all active inputs
into one command per arm per tick.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import RcmTwinError, UndefinedDirectionError
from .rcm import FulcrumFrame, RcmCommand, SphericalState, radial_direction, tip_delta_to_command

__all__ = [
    "Action",
    "TeleopIntent",
    "StylusSample",
    "DeadZoneConfig",
    "BaseRates",
    "TeleopConfig",
    "SpeedScale",
    "KEYMAP",
    "SPEED_LEVELS",
    "SPEED_LEVEL_DEFAULT",
    "map_key",
    "intent_to_command",
    "lateral_directions",
    "dead_zone_filter",
    "free_state",
    "TeleopSession",
]


class Action(str, Enum):
    IN = "In"
    OUT = "Out"
    LEFT = "Left"
    RIGHT = "Right"
    UP = "Up"
    DOWN = "Down"
    ROTATE_CW = "RotateCW"
    ROTATE_CCW = "RotateCCW"
    GRASP = "Grasp"
    RELEASE = "Release"
    SPEED_UP = "SpeedUp"
    SPEED_DOWN = "SpeedDown"
    NONE = "None"


@dataclass(frozen=True)
class TeleopIntent:
    side: str  # "left" | "right"
    action: Action


# One hand per arm: left hand on WASD-cluster keys, right hand on the
# IJKL cluster; Ctrl/Alt of the matching side step that arm's speed ladder.
_LEFT_KEYS = {
    "W": Action.IN, "S": Action.OUT,
    "A": Action.LEFT, "D": Action.RIGHT,
    "Q": Action.UP, "E": Action.DOWN,
    "C": Action.ROTATE_CW, "X": Action.ROTATE_CCW,
    "R": Action.GRASP, "F": Action.RELEASE,
    "LCTRL": Action.SPEED_UP, "LALT": Action.SPEED_DOWN,
}
_RIGHT_KEYS = {
    "I": Action.IN, "K": Action.OUT,
    "J": Action.LEFT, "L": Action.RIGHT,
    "U": Action.UP, "O": Action.DOWN,
    "M": Action.ROTATE_CW, "N": Action.ROTATE_CCW,
    "Y": Action.GRASP, "H": Action.RELEASE,
    "RCTRL": Action.SPEED_UP, "RALT": Action.SPEED_DOWN,
}
KEYMAP: dict[str, TeleopIntent] = {
    **{k: TeleopIntent("left", a) for k, a in _LEFT_KEYS.items()},
    **{k: TeleopIntent("right", a) for k, a in _RIGHT_KEYS.items()},
}


def map_key(key: str) -> TeleopIntent | None:
    """Resolve a key name to its (arm, action) intent; None when unmapped.

    Letter keys are case-insensitive; modifier keys use the names
    LCTRL/LALT/RCTRL/RALT.
    """
    return KEYMAP.get(str(key).strip().upper())


# -- speed ladder ----------------------------------------------------------------

SPEED_LEVELS = 7
SPEED_LEVEL_DEFAULT = 4  # factor 1.0
SPEED_FACTOR_MIN = 0.25
SPEED_FACTOR_MAX = 2.0


@dataclass(frozen=True)
class SpeedScale:
    """Discrete speed multiplier: 7 levels spaced geometrically (x sqrt 2)."""

    level: int

    def __post_init__(self):
        if not 0 <= self.level < SPEED_LEVELS:
            raise ValueError(f"speed level must be in [0, {SPEED_LEVELS - 1}]")

    @property
    def factor(self) -> float:
        return SPEED_FACTOR_MIN * 2.0 ** (self.level / 2.0)

    def bumped(self, delta: int) -> "SpeedScale":
        return SpeedScale(min(SPEED_LEVELS - 1, max(0, self.level + delta)))


# -- configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class DeadZoneConfig:
    linear_threshold: float = 0.002  # m
    angular_threshold: float = math.radians(2.0)

    def __post_init__(self):
        if self.linear_threshold <= 0.0 or self.angular_threshold <= 0.0:
            raise ValueError("dead-zone thresholds must be positive")


@dataclass(frozen=True)
class BaseRates:
    """Command rates at speed factor 1."""

    tip: float = 0.010  # m/s straight-line tip speed
    spin: float = math.radians(45.0)  # rad/s shaft rotation
    grasp: float = 1.0  # full-range fractions per second


@dataclass(frozen=True)
class TeleopConfig:
    rates: BaseRates = field(default_factory=BaseRates)
    dead_zone: DeadZoneConfig = field(default_factory=DeadZoneConfig)
    stylus_linear_gain: float = 1.0  # (m/s per m of displacement)
    stylus_angular_gain: float = 1.0  # (rad/s per rad of twist)
    tip_speed_cap: float = 0.05  # m/s, hard cap on commanded tip speed
    queue_size: int = 256


# -- stylus ------------------------------------------------------------------------


@dataclass(frozen=True)
class StylusSample:
    position: np.ndarray  # (3,) m
    orientation: tuple[float, float, float]  # roll, pitch, yaw rad
    button1: bool = False
    button2: bool = False
    timestamp: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        p.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", tuple(float(v) for v in self.orientation))


def free_state(sample: StylusSample) -> bool:
    """Both buttons pressed: halt command transmission entirely."""
    return bool(sample.button1 and sample.button2)


def dead_zone_filter(
    reference: StylusSample, current: StylusSample, cfg: DeadZoneConfig
) -> tuple[np.ndarray, bool]:
    """Threshold-shifted pose delta between two samples.

    Position uses a spherical shell: deltas shorter than the linear
    threshold vanish, longer ones are shortened by the threshold along
    their own direction, so output magnitude is continuous at the boundary.
    Each orientation angle is shifted per-component the same way.  Returns
    (6-vector: xyz then roll/pitch/yaw, any-component-active flag).
    """
    out = np.zeros(6)
    dp = current.position - reference.position
    norm = float(np.linalg.norm(dp))
    if norm > cfg.linear_threshold:
        out[:3] = dp * (1.0 - cfg.linear_threshold / norm)
    for i in range(3):
        da = current.orientation[i] - reference.orientation[i]
        if abs(da) > cfg.angular_threshold:
            out[3 + i] = da - math.copysign(cfg.angular_threshold, da)
    return out, bool(np.any(out != 0.0))


# -- command synthesis -------------------------------------------------------------


def lateral_directions(
    frame: FulcrumFrame, state: SphericalState
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit vectors (into, left, up) relative to the current insertion axis.

    ``into`` points along the shaft towards the tip; ``left`` is horizontal
    (world z crossed with ``into``); ``up`` completes the triad.  Raises
    UndefinedDirectionError when the shaft is vertical (no horizontal
    reference).
    """
    into = -radial_direction(state.theta, state.phi)
    left = np.cross([0.0, 0.0, 1.0], into)
    n = float(np.linalg.norm(left))
    if n < 1e-9:
        raise UndefinedDirectionError("lateral directions undefined for a vertical shaft")
    left /= n
    return into, left, np.cross(into, left)


_ACTION_SIGNS = {
    Action.IN: -1.0,  # deeper: outside length r shrinks
    Action.OUT: +1.0,
    Action.ROTATE_CW: -1.0,  # negative spin about the axis pointing into the body
    Action.ROTATE_CCW: +1.0,
    Action.GRASP: +1.0,
    Action.RELEASE: -1.0,
}
_LATERAL = {Action.LEFT, Action.RIGHT, Action.UP, Action.DOWN}


def intent_to_command(
    intent: TeleopIntent,
    speed: SpeedScale,
    dt: float,
    rates: BaseRates | None = None,
    *,
    frame: FulcrumFrame | None = None,
    state: SphericalState | None = None,
) -> RcmCommand:
    """One intent's per-tick increment at the given speed.

    Lateral actions need the arm's docked ``frame`` and current ``state``
    (the tip direction depends on where the shaft points); the other
    actions are frame-free.  Speed-ladder and None intents give a zero
    command (the session adjusts its level on the key edge instead).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rates = rates or BaseRates()
    a = intent.action
    s = speed.factor * dt
    if a in (Action.NONE, Action.SPEED_UP, Action.SPEED_DOWN):
        return RcmCommand(0.0, 0.0, 0.0, 0.0, 0.0)
    if a in (Action.IN, Action.OUT):
        return RcmCommand(0.0, 0.0, _ACTION_SIGNS[a] * rates.tip * s, 0.0, 0.0)
    if a in (Action.ROTATE_CW, Action.ROTATE_CCW):
        return RcmCommand(0.0, 0.0, 0.0, _ACTION_SIGNS[a] * rates.spin * s, 0.0)
    if a in (Action.GRASP, Action.RELEASE):
        return RcmCommand(0.0, 0.0, 0.0, 0.0, _ACTION_SIGNS[a] * rates.grasp * s)
    if a in _LATERAL:
        if frame is None or state is None:
            raise ValueError("lateral actions require frame and state")
        _, left, up = lateral_directions(frame, state)
        direction = {
            Action.LEFT: left, Action.RIGHT: -left,
            Action.UP: up, Action.DOWN: -up,
        }[a]
        return tip_delta_to_command(frame, state, direction * rates.tip * s)
    raise ValueError(f"unhandled action {a!r}")


def _merge(*commands: RcmCommand) -> RcmCommand:
    return RcmCommand(
        sum(c.d_theta for c in commands),
        sum(c.d_phi for c in commands),
        sum(c.d_r for c in commands),
        sum(c.d_spin for c in commands),
        sum(c.d_grasp for c in commands),
    )


# -- session ------------------------------------------------------------------------


@dataclass
class _StylusChannel:
    anchor: StylusSample | None = None
    latest: StylusSample | None = None
    free: bool = False
    last_timestamp: float = -math.inf


class TeleopSession:
    """Per-operator input state: queues, held keys, speed levels, stylus.

    Events are queued from any producer via `key_event` / `stylus_event`
    and folded into per-arm commands once per tick by `step(twin)`.  The
    ``twin`` argument only needs ``frame(arm)`` and ``spherical(arm)``
    accessors.  Queues are bounded: when full, the oldest event is dropped
    and counted in ``dropped``.
    """

    def __init__(self, config: TeleopConfig | None = None):
        self.config = config or TeleopConfig()
        self.speed: dict[str, SpeedScale] = {
            "left": SpeedScale(SPEED_LEVEL_DEFAULT),
            "right": SpeedScale(SPEED_LEVEL_DEFAULT),
        }
        self._queues: dict[str, deque] = {
            "left": deque(maxlen=self.config.queue_size),
            "right": deque(maxlen=self.config.queue_size),
        }
        self._held: dict[str, set[Action]] = {"left": set(), "right": set()}
        self._stylus: dict[str, _StylusChannel] = {
            "left": _StylusChannel(), "right": _StylusChannel(),
        }
        self.dropped = {"left": 0, "right": 0}
        self.stale = {"left": 0, "right": 0}

    # -- producers ----------------------------------------------------------

    def key_event(self, key: str, pressed: bool) -> bool:
        """Queue a key edge; returns False for unmapped keys."""
        intent = map_key(key)
        if intent is None:
            return False
        self._push(intent.side, ("key", intent.action, pressed))
        return True

    def stylus_event(self, side: str, sample: StylusSample) -> bool:
        """Queue a stylus sample for one arm; stale timestamps are dropped."""
        if side not in self._queues:
            raise ValueError(f"unknown side {side!r}")
        self._push(side, ("stylus", sample))
        return True

    def _push(self, side: str, event) -> None:
        q = self._queues[side]
        if len(q) == q.maxlen:
            self.dropped[side] += 1
        q.append(event)

    # -- per-tick consumption -------------------------------------------------

    def _drain(self, side: str) -> None:
        q = self._queues[side]
        while q:
            kind, *rest = q.popleft()
            if kind == "key":
                action, pressed = rest
                if action in (Action.SPEED_UP, Action.SPEED_DOWN):
                    if pressed:  # edge-triggered: one step per press
                        delta = 1 if action is Action.SPEED_UP else -1
                        self.speed[side] = self.speed[side].bumped(delta)
                elif pressed:
                    self._held[side].add(action)
                else:
                    self._held[side].discard(action)
            else:
                (sample,) = rest
                ch = self._stylus[side]
                if sample.timestamp < ch.last_timestamp:
                    self.stale[side] += 1
                    continue
                ch.last_timestamp = sample.timestamp
                was_free = ch.free
                ch.free = free_state(sample)
                if was_free and not ch.free:
                    ch.anchor = sample  # re-anchor where the stylus was released
                elif ch.anchor is None:
                    ch.anchor = sample
                ch.latest = sample

    def _stylus_contrib(self, side: str, dt: float) -> tuple[np.ndarray, float, float]:
        """(tip velocity vector, d_spin, d_grasp) from the stylus channel."""
        ch = self._stylus[side]
        cfg = self.config
        factor = self.speed[side].factor
        if ch.free or ch.latest is None or ch.anchor is None:
            return np.zeros(3), 0.0, 0.0
        delta, _ = dead_zone_filter(ch.anchor, ch.latest, cfg.dead_zone)
        v_tip = delta[:3] * cfg.stylus_linear_gain * factor
        speed = float(np.linalg.norm(v_tip))
        if speed > cfg.tip_speed_cap:
            v_tip *= cfg.tip_speed_cap / speed
        d_spin = delta[3] * cfg.stylus_angular_gain * factor * dt
        d_grasp = 0.0
        if ch.latest.button1 and not ch.latest.button2:
            d_grasp = cfg.rates.grasp * factor * dt
        elif ch.latest.button2 and not ch.latest.button1:
            d_grasp = -cfg.rates.grasp * factor * dt
        return v_tip, d_spin, d_grasp

    def step(self, twin, dt: float) -> dict[str, RcmCommand]:
        """Drain queues and emit one folded command per arm for this tick."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        out: dict[str, RcmCommand] = {}
        for side in self._queues:
            self._drain(side)
            frame = twin.frame(side)
            state = twin.spherical(side)
            rates = self.config.rates
            factor = self.speed[side].factor
            d_r = d_spin = d_grasp = 0.0
            tip_vec = np.zeros(3)
            lateral_failed = False
            for action in self._held[side]:
                if action in (Action.IN, Action.OUT):
                    d_r += _ACTION_SIGNS[action] * rates.tip * factor * dt
                elif action in (Action.ROTATE_CW, Action.ROTATE_CCW):
                    d_spin += _ACTION_SIGNS[action] * rates.spin * factor * dt
                elif action in (Action.GRASP, Action.RELEASE):
                    d_grasp += _ACTION_SIGNS[action] * rates.grasp * factor * dt
                elif action in _LATERAL:
                    try:
                        _, left, up = lateral_directions(frame, state)
                    except UndefinedDirectionError:
                        lateral_failed = True
                        continue
                    tip_vec += {
                        Action.LEFT: left, Action.RIGHT: -left,
                        Action.UP: up, Action.DOWN: -up,
                    }[action] * rates.tip * factor * dt
            v_stylus, spin_stylus, grasp_stylus = self._stylus_contrib(side, dt)
            tip_vec = tip_vec + v_stylus * dt
            d_spin += spin_stylus
            d_grasp += grasp_stylus
            lateral_cmd = RcmCommand(0.0, 0.0, 0.0, 0.0, 0.0)
            if not lateral_failed and float(np.linalg.norm(tip_vec)) > 0.0:
                try:
                    lateral_cmd = tip_delta_to_command(frame, state, tip_vec)
                except RcmTwinError:
                    lateral_cmd = RcmCommand(0.0, 0.0, 0.0, 0.0, 0.0)
            out[side] = _merge(
                lateral_cmd, RcmCommand(0.0, 0.0, d_r, d_spin, d_grasp)
            )
        return out

    # -- introspection ---------------------------------------------------------

    def held(self, side: str) -> frozenset[Action]:
        return frozenset(self._held[side])

    def speed_level(self, side: str) -> int:
        return self.speed[side].level

    def is_free(self, side: str) -> bool:
        return self._stylus[side].free
