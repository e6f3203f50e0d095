"""Wire-format guarantees: canonical encoding, strict decoding, round trips."""

import json
import math

import pytest

from rcmtwin import (
    COMMAND_KINDS,
    PROTOCOL_VERSION,
    SESSION_VERBS,
    DigitalTwin,
    ProtocolDecodeError,
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


def stylus_dict(seq=5, arm="right"):
    return make_stylus_command(
        seq, arm, position=(0.01, -0.02, 0.003), orientation=(0.1, 0.0, -0.2),
        button1=True, button2=False, timestamp=12.5,
    )


# -- canonical encoding -----------------------------------------------------------


def test_encode_produces_one_terminated_utf8_line():
    raw = encode(make_nack(3, "bad_seq", "stale"))
    assert isinstance(raw, bytes)
    assert raw.endswith(b"\n")
    assert raw.count(b"\n") == 1


def test_encode_golden_bytes():
    raw = encode(make_nack(3, "bad_seq", "stale"))
    assert raw == b'{"detail":"stale","error":"bad_seq","seq":3,"type":"nack","v":1}\n'


def test_encode_is_key_order_independent():
    a = {"v": 1, "type": "nack", "seq": None, "error": "x", "detail": ""}
    b = {"detail": "", "error": "x", "seq": None, "type": "nack", "v": 1}
    assert encode(a) == encode(b)


def test_encode_has_no_extra_whitespace():
    raw = encode({"v": 1, "type": "state", "arms": {"left": [1, 2]}})
    assert b" " not in raw.rstrip(b"\n")


def test_encode_rejects_non_finite_numbers():
    with pytest.raises(ValueError):
        encode({"v": 1, "type": "state", "x": math.nan})
    with pytest.raises(ValueError):
        encode({"v": 1, "type": "state", "x": math.inf})


# -- envelope decoding ------------------------------------------------------------


def test_decode_line_accepts_bytes_and_str():
    msg = make_key_command(1, "left", "W", pressed=True)
    assert decode_line(encode(msg)) == msg
    assert decode_line(encode(msg).decode("utf-8")) == msg


@pytest.mark.parametrize("line", ["", "   ", b"\n", b"  \r\n"])
def test_decode_line_rejects_blank_input(line):
    with pytest.raises(ProtocolDecodeError):
        decode_line(line)


def test_decode_line_rejects_malformed_json():
    with pytest.raises(ProtocolDecodeError, match="invalid JSON"):
        decode_line(b'{"v":1,"type"')


def test_decode_line_rejects_non_object():
    with pytest.raises(ProtocolDecodeError, match="object"):
        decode_line(b"[1,2,3]")


def test_decode_line_requires_version_field():
    with pytest.raises(ProtocolDecodeError) as err:
        decode_line(b'{"type":"state"}')
    assert err.value.field == "v"


def test_decode_line_rejects_wrong_version():
    with pytest.raises(ProtocolDecodeError) as err:
        decode_line(b'{"v":2,"type":"state"}')
    assert err.value.field == "v"


def test_decode_line_rejects_boolean_version():
    with pytest.raises(ProtocolDecodeError) as err:
        decode_line(b'{"v":true,"type":"state"}')
    assert err.value.field == "v"


def test_decode_line_requires_type_field():
    with pytest.raises(ProtocolDecodeError) as err:
        decode_line(b'{"v":1}')
    assert err.value.field == "type"


def test_unknown_fields_are_ignored():
    msg = make_key_command(1, "left", "W", pressed=True)
    msg["future_extension"] = {"nested": [1, 2]}
    decoded = decode_line(encode(msg))
    cmd = decode_command(decoded)
    assert cmd.seq == 1 and cmd.kind == "key_down"


def test_decoding_is_stateless_across_bad_lines():
    good = encode(make_key_command(2, "left", "A", pressed=False))
    with pytest.raises(ProtocolDecodeError):
        decode_line(good[: len(good) // 2])  # truncated mid-object
    assert decode_line(good)["seq"] == 2  # next full line unaffected


# -- command validation -----------------------------------------------------------


def test_key_command_round_trip():
    for pressed, kind in ((True, "key_down"), (False, "key_up")):
        msg = make_key_command(9, "right", "LCTRL", pressed=pressed)
        cmd = decode_command(decode_line(encode(msg)))
        assert cmd.seq == 9
        assert cmd.arm == "right"
        assert cmd.kind == kind
        assert cmd.payload == {"key": "LCTRL"}


def test_stylus_command_round_trip():
    cmd = decode_command(decode_line(encode(stylus_dict())))
    assert cmd.kind == "stylus"
    assert cmd.payload["position"] == [0.01, -0.02, 0.003]
    assert cmd.payload["orientation"] == [0.1, 0.0, -0.2]
    assert cmd.payload["button1"] is True
    assert cmd.payload["button2"] is False
    assert cmd.payload["timestamp"] == 12.5


@pytest.mark.parametrize("verb", SESSION_VERBS)
def test_session_command_round_trip(verb):
    level = 5 if verb == "set_speed" else None
    msg = make_session_command(4, "left", verb, level=level)
    cmd = decode_command(decode_line(encode(msg)))
    assert cmd.kind == "session"
    assert cmd.payload["verb"] == verb
    if verb == "set_speed":
        assert cmd.payload["level"] == 5


def test_command_kinds_are_exactly_the_documented_four():
    assert COMMAND_KINDS == ("key_down", "key_up", "stylus", "session")
    assert SESSION_VERBS == ("start", "hold", "resume", "set_speed")


def test_non_command_type_rejected():
    with pytest.raises(ProtocolDecodeError) as err:
        decode_command({"v": 1, "type": "state"})
    assert err.value.field == "type"


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda m: m.pop("seq"), "seq"),
        (lambda m: m.update(seq=-1), "seq"),
        (lambda m: m.update(seq=True), "seq"),
        (lambda m: m.update(seq=1.5), "seq"),
        (lambda m: m.update(arm="center"), "arm"),
        (lambda m: m.update(arm=3), "arm"),
        (lambda m: m.update(kind="warp"), "kind"),
        (lambda m: m.pop("payload"), "payload"),
        (lambda m: m.update(payload=[1]), "payload"),
    ],
)
def test_command_envelope_validation(mutate, field):
    msg = make_key_command(1, "left", "W", pressed=True)
    mutate(msg)
    with pytest.raises(ProtocolDecodeError) as err:
        decode_command(msg)
    assert err.value.field == field


def test_key_payload_requires_key():
    msg = make_key_command(1, "left", "W", pressed=True)
    msg["payload"] = {}
    with pytest.raises(ProtocolDecodeError) as err:
        decode_command(msg)
    assert err.value.field == "key"


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda p: p.update(position=[0.0, 0.0]), "position"),
        (lambda p: p.update(position=[0.0, 0.0, True]), "position"),
        (lambda p: p.update(orientation="up"), "orientation"),
        (lambda p: p.update(button1=1), "button1"),
        (lambda p: p.pop("button2"), "button2"),
        (lambda p: p.update(timestamp="soon"), "timestamp"),
        (lambda p: p.pop("timestamp"), "timestamp"),
    ],
)
def test_stylus_payload_validation(mutate, field):
    msg = stylus_dict()
    mutate(msg["payload"])
    with pytest.raises(ProtocolDecodeError) as err:
        decode_command(msg)
    assert err.value.field == field


def test_stylus_rejects_non_finite_vector_from_the_wire():
    # json.loads accepts bare Infinity, so a peer could smuggle it in.
    raw = encode(stylus_dict()).replace(b"0.01", b"Infinity")
    obj = decode_line(raw)
    with pytest.raises(ProtocolDecodeError) as err:
        decode_command(obj)
    assert err.value.field == "position"


def test_stylus_integer_coordinates_are_accepted():
    msg = stylus_dict()
    msg["payload"]["position"] = [0, 0, 0]
    msg["payload"]["timestamp"] = 3
    cmd = decode_command(msg)
    assert list(cmd.payload["position"]) == [0, 0, 0]


def test_session_verb_validation():
    msg = make_session_command(1, "left", "start")
    msg["payload"]["verb"] = "pause"
    with pytest.raises(ProtocolDecodeError) as err:
        decode_command(msg)
    assert err.value.field == "verb"


@pytest.mark.parametrize("level", [None, True, 4.5, "four"])
def test_set_speed_requires_integer_level(level):
    msg = make_session_command(1, "left", "set_speed")
    if level is not None:
        msg["payload"]["level"] = level
    with pytest.raises(ProtocolDecodeError) as err:
        decode_command(msg)
    assert err.value.field == "level"


# -- server messages --------------------------------------------------------------


def test_welcome_carries_the_whole_workspace(workspace):
    msg = make_welcome("controller", 125.0, 0.125, workspace)
    back = decode_line(encode(msg))
    assert back["role"] == "controller"
    assert back["rate_hz"] == 125.0
    assert back["lookahead_s"] == 0.125
    cfg = back["config"]
    assert cfg["box_center"] == list(workspace.box_center)
    assert cfg["box_dims"] == list(workspace.box_dims)
    assert cfg["tool_length"] == workspace.tool_length
    assert cfg["hole_diameter"] == workspace.hole_diameter
    assert len(cfg["holes"]) == len(workspace.holes)
    for name, placement in workspace.arms.items():
        arm = cfg["arms"][name]
        assert arm["theta0"] == placement.theta0
        assert arm["phi0"] == placement.phi0
        assert arm["r0"] == placement.r0
        assert arm["hole"] == placement.hole  # index into config["holes"]


def test_state_broadcast_round_trip():
    twin = DigitalTwin()
    snaps = twin.tick()
    flanges = {name: snaps[name].flange.position for name in snaps}
    msg = make_state(
        tick=1, time_s=0.008, snapshots=snaps,
        speed_levels={"left": 4, "right": 6},
        applied_seq=17, latency_ms=1.25, flange_positions=flanges,
    )
    back = decode_line(encode(msg))
    assert back["tick"] == 1
    assert back["time_s"] == 0.008
    assert back["applied_seq"] == 17
    assert back["latency_ms"] == 1.25
    merged = 0
    for name, snap in snaps.items():
        arm = back["arms"][name]
        merged |= snap.flags
        assert arm["q"] == [float(x) for x in snap.q]
        assert arm["tip"] == [float(x) for x in snap.tip]
        assert arm["grasp"] == snap.grasp
        assert arm["spin"] == snap.spin
        assert arm["rcm_error_mm"] == snap.rcm_error_mm
        assert arm["flags"] == snap.flags
        assert arm["hold"] is snap.hold
        assert arm["flange"] == [float(x) for x in snap.flange.position]
    assert back["arms"]["left"]["speed_level"] == 4
    assert back["arms"]["right"]["speed_level"] == 6
    assert back["flags"] == merged


def test_state_flange_is_optional():
    twin = DigitalTwin()
    snaps = {"left": twin.tick()["left"]}
    msg = make_state(1, 0.008, snaps, {"left": 4}, None, None)
    back = decode_line(encode(msg))
    assert "flange" not in back["arms"]["left"]
    assert back["applied_seq"] is None
    assert back["latency_ms"] is None


def test_nack_with_unknown_sequence():
    back = decode_line(encode(make_nack(None, "decode_error", "bad json")))
    assert back["seq"] is None
    assert back["error"] == "decode_error"
    assert back["detail"] == "bad json"


def test_all_message_types_survive_a_json_round_trip(workspace):
    twin = DigitalTwin()
    snaps = twin.tick()
    messages = [
        make_key_command(1, "left", "W", pressed=True),
        stylus_dict(),
        make_session_command(2, "right", "set_speed", level=3),
        make_welcome("observer", 125.0, 0.125, workspace),
        make_state(5, 0.04, snaps, {"left": 4, "right": 4}, 2, 0.9),
        make_nack(2, "read_only", "observer peers cannot drive"),
    ]
    for msg in messages:
        assert decode_line(encode(msg)) == json.loads(encode(msg))
        assert decode_line(encode(msg))["v"] == PROTOCOL_VERSION
