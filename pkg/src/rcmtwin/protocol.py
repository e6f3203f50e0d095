"""Wire protocol: newline-delimited JSON messages between service and clients.

Every message is one UTF-8 JSON object per line with two required fields:
``v`` (schema version) and ``type``.  Unknown fields are ignored on decode
so older peers keep working; missing required fields raise
`ProtocolDecodeError` naming the field.  Message types:

* ``welcome``   server -> client on connect: role, rate, and a one-time
                workspace snapshot (box, holes, tool, per-arm docking) so a
                renderer needs no other configuration;
* ``command``   client -> server: key edges, stylus samples, or session
                verbs (start/hold/resume/set_speed), sequenced per client;
* ``state``     server -> all clients once per tick: per-arm joints, tip,
                grasp/spin, pivot error, speed level, safety flags, plus
                the highest command sequence applied and its queue latency;
* ``nack``      server -> client when a command is rejected (read-only
                peer, bad sequence, undecodable payload).

Encoding is canonical (sorted keys, no whitespace) so equal messages have
equal bytes, which keeps tests and golden traces stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .config import Workspace
from .errors import ProtocolDecodeError

__all__ = [
    "PROTOCOL_VERSION",
    "COMMAND_KINDS",
    "SESSION_VERBS",
    "CommandMessage",
    "encode",
    "decode_line",
    "decode_command",
    "make_key_command",
    "make_stylus_command",
    "make_session_command",
    "make_welcome",
    "make_state",
    "make_nack",
]

PROTOCOL_VERSION = 1

COMMAND_KINDS = ("key_down", "key_up", "stylus", "session")
SESSION_VERBS = ("start", "hold", "resume", "set_speed")
ARMS = ("left", "right")


def encode(message: dict) -> bytes:
    """One canonical JSON line (sorted keys, compact, trailing newline)."""
    return (json.dumps(message, sort_keys=True, separators=(",", ":"),
                       allow_nan=False) + "\n").encode("utf-8")


def decode_line(line: bytes | str) -> dict:
    """Parse one line into a message dict, checking the envelope fields."""
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="strict")
    text = line.strip()
    if not text:
        raise ProtocolDecodeError("empty line", field=None)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolDecodeError(f"invalid JSON: {exc.msg}", field=None) from exc
    if not isinstance(obj, dict):
        raise ProtocolDecodeError("message must be a JSON object", field=None)
    v = _need(obj, "v", int)
    if v != PROTOCOL_VERSION:
        raise ProtocolDecodeError(
            f"unsupported schema version {v} (expected {PROTOCOL_VERSION})",
            field="v",
        )
    _need(obj, "type", str)
    return obj


def _need(obj: dict, field: str, kind: type | tuple[type, ...]) -> Any:
    if field not in obj:
        raise ProtocolDecodeError(f"missing required field '{field}'", field=field)
    value = obj[field]
    if kind is int and isinstance(value, bool):  # bools are ints in Python
        raise ProtocolDecodeError(f"field '{field}' has wrong type", field=field)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind):
        raise ProtocolDecodeError(f"field '{field}' has wrong type", field=field)
    return value


def _need_vec(obj: dict, field: str, length: int) -> list[float]:
    value = _need(obj, field, list)
    if len(value) != length or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
        for x in value
    ):
        raise ProtocolDecodeError(
            f"field '{field}' must be {length} finite numbers", field=field
        )
    return [float(x) for x in value]


# -- commands ----------------------------------------------------------------------


@dataclass(frozen=True)
class CommandMessage:
    seq: int
    arm: str
    kind: str  # key_down | key_up | stylus | session
    payload: dict


def decode_command(obj: dict) -> CommandMessage:
    """Validate a decoded ``command`` dict into a typed message."""
    if obj.get("type") != "command":
        raise ProtocolDecodeError("not a command message", field="type")
    seq = _need(obj, "seq", int)
    if seq < 0:
        raise ProtocolDecodeError("field 'seq' must be non-negative", field="seq")
    arm = _need(obj, "arm", str)
    if arm not in ARMS:
        raise ProtocolDecodeError("field 'arm' must be 'left' or 'right'", field="arm")
    kind = _need(obj, "kind", str)
    if kind not in COMMAND_KINDS:
        raise ProtocolDecodeError(
            f"field 'kind' must be one of {COMMAND_KINDS}", field="kind"
        )
    payload = _need(obj, "payload", dict)
    if kind in ("key_down", "key_up"):
        _need(payload, "key", str)
    elif kind == "stylus":
        _need_vec(payload, "position", 3)
        _need_vec(payload, "orientation", 3)
        _need(payload, "button1", bool)
        _need(payload, "button2", bool)
        _need(payload, "timestamp", float)
    else:
        verb = _need(payload, "verb", str)
        if verb not in SESSION_VERBS:
            raise ProtocolDecodeError(
                f"field 'verb' must be one of {SESSION_VERBS}", field="verb"
            )
        if verb == "set_speed":
            _need(payload, "level", int)
    return CommandMessage(seq=seq, arm=arm, kind=kind, payload=payload)


def make_key_command(seq: int, arm: str, key: str, pressed: bool) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "type": "command",
        "seq": seq,
        "arm": arm,
        "kind": "key_down" if pressed else "key_up",
        "payload": {"key": key},
    }


def make_stylus_command(seq: int, arm: str, position, orientation,
                        button1: bool, button2: bool, timestamp: float) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "type": "command",
        "seq": seq,
        "arm": arm,
        "kind": "stylus",
        "payload": {
            "position": [float(x) for x in position],
            "orientation": [float(x) for x in orientation],
            "button1": bool(button1),
            "button2": bool(button2),
            "timestamp": float(timestamp),
        },
    }


def make_session_command(seq: int, arm: str, verb: str, level: int | None = None) -> dict:
    payload: dict[str, Any] = {"verb": verb}
    if level is not None:
        payload["level"] = int(level)
    return {
        "v": PROTOCOL_VERSION,
        "type": "command",
        "seq": seq,
        "arm": arm,
        "kind": "session",
        "payload": payload,
    }


# -- server messages -----------------------------------------------------------------


def make_welcome(role: str, rate_hz: float, lookahead_s: float,
                 workspace: Workspace) -> dict:
    arms = {
        name: {
            "hole": p.hole,
            "theta0": p.theta0,
            "phi0": p.phi0,
            "r0": p.r0,
        }
        for name, p in workspace.arms.items()
    }
    return {
        "v": PROTOCOL_VERSION,
        "type": "welcome",
        "role": role,
        "rate_hz": float(rate_hz),
        "lookahead_s": float(lookahead_s),
        "config": {
            "box_center": list(map(float, workspace.box_center)),
            "box_dims": list(map(float, workspace.box_dims)),
            "holes": np.asarray(workspace.holes, dtype=float).tolist(),
            "hole_diameter": float(workspace.hole_diameter),
            "tool_diameter": float(workspace.tool_diameter),
            "tool_length": float(workspace.tool_length),
            "theta_limit": float(workspace.theta_limit),
            "r_limits": list(map(float, workspace.r_limits)),
            "arms": arms,
        },
    }


def make_state(tick: int, time_s: float, snapshots: dict, speed_levels: dict,
               applied_seq: int | None, latency_ms: float | None,
               flange_positions: dict | None = None) -> dict:
    """Build the per-tick broadcast from `ArmSnapshot` values.

    ``flange_positions`` lets renderers draw the full shaft segment
    (flange to tip) without doing any kinematics of their own.
    """
    arms = {}
    flags_all = 0
    for name, snap in snapshots.items():
        flags_all |= snap.flags
        arm_obj = {
            "q": [float(x) for x in snap.q],
            "tip": [float(x) for x in snap.tip],
            "grasp": float(snap.grasp),
            "spin": float(snap.spin),
            "rcm_error_mm": float(snap.rcm_error_mm),
            "speed_level": int(speed_levels.get(name, 0)),
            "flags": int(snap.flags),
            "hold": bool(snap.hold),
        }
        if flange_positions and name in flange_positions:
            arm_obj["flange"] = [float(x) for x in flange_positions[name]]
        arms[name] = arm_obj
    return {
        "v": PROTOCOL_VERSION,
        "type": "state",
        "tick": int(tick),
        "time_s": float(time_s),
        "flags": int(flags_all),
        "arms": arms,
        "applied_seq": applied_seq,
        "latency_ms": latency_ms,
    }


def make_nack(seq: int | None, error: str, detail: str = "") -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "type": "nack",
        "seq": seq,
        "error": error,
        "detail": detail,
    }
