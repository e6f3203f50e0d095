"""Live teleoperation service: the twin stepped at wall-clock rate over TCP.

The simulation itself is tick-driven and deterministic; this layer maps it
onto real time.  A deadline scheduler targets ``t0 + k/rate`` for tick k
(so the long-run average period is exact even when single ticks jitter),
drains the command queue, folds operator input through `TeleopSession`,
advances the twin, and broadcasts one ``state`` line to every peer.

Peers speak the newline-JSON protocol from `rcmtwin.protocol` over plain
TCP, or over WebSocket when ``--http-port`` is given (one JSON object per
WS message); the same port also serves the static console bundle when
``--static-dir`` points at one.  The first connected peer controls the
twin; later peers observe and get a ``read_only`` nack if they try to
drive.  A vacant controller slot (after a disconnect) goes to the next
peer that connects or sends ``session start``.

Commands carry a per-client sequence number: lower-or-equal sequences are
rejected, gaps are reported with a nack but the command still applies —
ordering is never silently repaired.  Each ``state`` line reports the
highest sequence applied on that tick and how long that command waited
between receipt and application (``latency_ms``).
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import math
import mimetypes
import os
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .config import load_robot_model, load_workspace
from .errors import ProtocolDecodeError
from .protocol import (
    CommandMessage,
    decode_command,
    decode_line,
    encode,
    make_nack,
    make_state,
    make_welcome,
)
from .servo import DEFAULT_CONTROL_RATE, DEFAULT_LOOKAHEAD, ServoConfig
from .teleop import SPEED_LEVELS, SpeedScale, StylusSample, TeleopSession
from .twin import DigitalTwin

__all__ = ["ServiceConfig", "TwinService", "main"]

log = logging.getLogger(__name__)

ENV_PREFIX = "RCMTWIN_"
WRITE_BUFFER_LIMIT = 1 << 20  # disconnect peers that fall this far behind


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8972
    http_port: int | None = None
    static_dir: str | None = None
    rate: float = DEFAULT_CONTROL_RATE
    lookahead: float = DEFAULT_LOOKAHEAD
    robot_path: str | None = None
    workspace_path: str | None = None


class _Peer:
    """One connected client, transport-agnostic."""

    _next_id = 0

    def __init__(self, send_bytes, close, describe: str):
        _Peer._next_id += 1
        self.id = _Peer._next_id
        self._send_bytes = send_bytes
        self._close = close
        self.describe = describe
        self.last_seq = -1
        self.alive = True

    def send(self, data: bytes) -> None:
        if not self.alive:
            return
        try:
            self._send_bytes(data)
        except Exception:
            self.drop()

    def drop(self) -> None:
        if self.alive:
            self.alive = False
            try:
                self._close()
            except Exception:
                pass


class TwinService:
    """Owns the twin, the operator session, the peers, and the tick loop."""

    def __init__(self, twin: DigitalTwin | None = None,
                 config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        if twin is None:
            model = load_robot_model(self.config.robot_path)
            workspace = load_workspace(self.config.workspace_path)
            servo = ServoConfig(
                control_rate=self.config.rate,
                lookahead_time=self.config.lookahead,
                max_joint_vel=model.velocity_limits,
            )
            twin = DigitalTwin(model, workspace, servo=servo)
        self.twin = twin
        self.session = TeleopSession()
        self.peers: dict[int, _Peer] = {}
        self.controller: _Peer | None = None
        self.pending: deque[tuple[_Peer, CommandMessage, float]] = deque()
        self.applied_seq: int | None = None
        self._tcp_server: asyncio.base_events.Server | None = None
        self._ws_server = None
        self._tick_task: asyncio.Task | None = None
        self._stopping = asyncio.Event()

    # -- lifecycle ------------------------------------------------------------

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, self.config.host, self.config.port
        )
        if self.config.http_port is not None:
            self._ws_server = await self._start_ws()
        self._tick_task = asyncio.create_task(self._tick_loop())

    async def stop(self) -> None:
        self._stopping.set()
        if self._tick_task:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        for peer in list(self.peers.values()):
            peer.drop()
        if self._tcp_server:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server:
            self._ws_server.close()
            await self._ws_server.wait_closed()

    async def serve_forever(self) -> None:
        await self.start()
        where = f"tcp://{self.config.host}:{self.tcp_port}"
        if self.config.http_port is not None:
            where += f", ws://{self.config.host}:{self.http_port}"
        log.info("serving at %s (rate %.0f Hz)", where, self.config.rate)
        try:
            await self._stopping.wait()
        finally:
            await self.stop()

    @property
    def tcp_port(self) -> int:
        assert self._tcp_server is not None and self._tcp_server.sockets
        return self._tcp_server.sockets[0].getsockname()[1]

    @property
    def http_port(self) -> int | None:
        if self._ws_server is None:
            return None
        return self._ws_server.sockets[0].getsockname()[1]

    # -- peer management ---------------------------------------------------------

    def _register(self, peer: _Peer) -> None:
        self.peers[peer.id] = peer
        if self.controller is None or not self.controller.alive:
            self._set_controller(peer)
        peer.send(encode(self._welcome_for(peer)))

    def _welcome_for(self, peer: _Peer) -> dict:
        role = "controller" if peer is self.controller else "observer"
        return make_welcome(role, self.config.rate, self.config.lookahead,
                            self.twin.workspace)

    def _set_controller(self, peer: _Peer | None) -> None:
        self.controller = peer
        self.applied_seq = None

    def _unregister(self, peer: _Peer) -> None:
        peer.drop()
        self.peers.pop(peer.id, None)
        if peer is self.controller:
            self._set_controller(None)

    # -- ingress -------------------------------------------------------------------

    def _on_line(self, peer: _Peer, line: bytes) -> None:
        """Decode, authorize, and queue one inbound line."""
        now = time.perf_counter()
        try:
            obj = decode_line(line)
            if obj["type"] != "command":
                return  # clients only send commands; ignore anything else
            cmd = decode_command(obj)
        except ProtocolDecodeError as exc:
            peer.send(encode(make_nack(None, "decode", str(exc))))
            return
        if cmd.seq <= peer.last_seq:
            peer.send(encode(make_nack(cmd.seq, "bad_seq",
                                       f"expected > {peer.last_seq}")))
            return
        if cmd.seq != peer.last_seq + 1 and peer.last_seq >= 0:
            peer.send(encode(make_nack(cmd.seq, "seq_gap",
                                       f"expected {peer.last_seq + 1}")))
        peer.last_seq = cmd.seq
        if cmd.kind == "session" and cmd.payload.get("verb") == "start":
            if self.controller is None or not self.controller.alive:
                self._set_controller(peer)
                peer.send(encode(self._welcome_for(peer)))
            elif peer is not self.controller:
                peer.send(encode(make_nack(cmd.seq, "read_only",
                                           "another peer is controlling")))
            return
        if peer is not self.controller:
            peer.send(encode(make_nack(cmd.seq, "read_only",
                                       "observer commands are ignored")))
            return
        self.pending.append((peer, cmd, now))

    # -- command application ----------------------------------------------------------

    def _drain(self, now: float) -> tuple[int | None, float | None]:
        applied: int | None = None
        latency: float | None = None
        while self.pending:
            peer, cmd, recv_t = self.pending.popleft()
            if peer is not self.controller:
                continue  # controller changed while queued
            try:
                self._apply(peer, cmd)
            except Exception as exc:  # a bad command must never kill the loop
                log.exception("command %s failed", cmd.kind)
                peer.send(encode(make_nack(cmd.seq, "error", str(exc))))
                continue
            applied = cmd.seq
            latency = max(latency or 0.0, (now - recv_t) * 1000.0)
        if applied is not None:
            self.applied_seq = applied
        return applied, latency

    def _apply(self, peer: _Peer, cmd: CommandMessage) -> None:
        if cmd.kind == "key_down":
            self.session.key_event(cmd.payload["key"], True)
        elif cmd.kind == "key_up":
            self.session.key_event(cmd.payload["key"], False)
        elif cmd.kind == "stylus":
            p = cmd.payload
            self.session.stylus_event(cmd.arm, StylusSample(
                position=p["position"],
                orientation=tuple(p["orientation"]),
                button1=p["button1"],
                button2=p["button2"],
                timestamp=p["timestamp"],
            ))
        else:
            verb = cmd.payload["verb"]
            if verb == "hold":
                self.twin.hold(cmd.arm)
            elif verb == "resume":
                self.twin.resume(cmd.arm)
            elif verb == "set_speed":
                level = cmd.payload["level"]
                if not 0 <= level < SPEED_LEVELS:
                    peer.send(encode(make_nack(
                        cmd.seq, "bad_level",
                        f"level must be in [0, {SPEED_LEVELS - 1}]")))
                    return
                self.session.speed[cmd.arm] = SpeedScale(level)

    # -- the loop -----------------------------------------------------------------------

    async def _tick_loop(self) -> None:
        dt = 1.0 / self.config.rate
        t0 = time.perf_counter()
        k = 0
        while not self._stopping.is_set():
            k += 1
            delay = t0 + k * dt - time.perf_counter()
            if delay > 0:
                await asyncio.sleep(delay)
            now = time.perf_counter()
            try:
                applied, latency = self._drain(now)
                commands = self.session.step(self.twin, self.twin.dt)
                snaps = self.twin.tick(commands)
                state = make_state(
                    tick=self.twin.tick_count,
                    time_s=self.twin.tick_count * self.twin.dt,
                    snapshots=snaps,
                    speed_levels={s: self.session.speed_level(s) for s in snaps},
                    applied_seq=self.applied_seq,
                    latency_ms=latency,
                    flange_positions={s: snaps[s].flange.position for s in snaps},
                )
            except Exception:
                log.exception("tick %d failed", k)
                continue
            data = encode(state)
            for peer in list(self.peers.values()):
                peer.send(data)

    # -- transports ------------------------------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        name = str(writer.get_extra_info("peername"))

        def send_bytes(data: bytes) -> None:
            if writer.transport.is_closing():
                raise ConnectionError("closed")
            writer.write(data)
            if writer.transport.get_write_buffer_size() > WRITE_BUFFER_LIMIT:
                raise ConnectionError("peer too slow")

        peer = _Peer(send_bytes, lambda: writer.close(), f"tcp {name}")
        self._register(peer)
        try:
            while peer.alive:
                line = await reader.readline()
                if not line:
                    break
                self._on_line(peer, line)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            self._unregister(peer)

    async def _start_ws(self):
        from websockets.asyncio.server import serve

        async def handler(connection):
            loop = asyncio.get_running_loop()
            outbox: asyncio.Queue[bytes] = asyncio.Queue(maxsize=256)

            def send_bytes(data: bytes) -> None:
                try:
                    outbox.put_nowait(data)
                except asyncio.QueueFull:
                    raise ConnectionError("peer too slow") from None

            peer = _Peer(send_bytes,
                         lambda: loop.create_task(connection.close()),
                         f"ws {connection.remote_address}")

            async def sender():
                while peer.alive:
                    data = await outbox.get()
                    await connection.send(data.decode("utf-8"))

            send_task = asyncio.create_task(sender())
            self._register(peer)
            try:
                async for message in connection:
                    if isinstance(message, bytes):
                        message = message.decode("utf-8", errors="strict")
                    for piece in message.splitlines():
                        self._on_line(peer, piece.encode("utf-8"))
            except Exception:
                pass
            finally:
                send_task.cancel()
                self._unregister(peer)

        return await serve(handler, self.config.host, self.config.http_port,
                           process_request=self._static_request)

    def _static_request(self, connection, request):
        """Serve the console bundle on plain HTTP requests; None upgrades to WS."""
        if "upgrade" in request.headers.get("Connection", "").lower():
            return None
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        def respond(status: int, reason: str, body: bytes, ctype: str):
            return Response(status, reason, Headers([
                ("Content-Type", ctype),
                ("Content-Length", str(len(body))),
                ("Cache-Control", "no-cache"),
            ]), body)

        if self.config.static_dir is None:
            return respond(404, "Not Found",
                           b"no static bundle configured (use --static-dir); "
                           b"WebSocket endpoint is at this same port\n",
                           "text/plain; charset=utf-8")
        root = Path(self.config.static_dir).resolve()
        rel = request.path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if root not in target.parents and target != root:
            return respond(403, "Forbidden", b"forbidden\n", "text/plain")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            return respond(404, "Not Found", b"not found\n", "text/plain")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return respond(200, "OK", target.read_bytes(), ctype)


# -- CLI ----------------------------------------------------------------------------------


def _env(name: str, default, cast):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise SystemExit(f"invalid {ENV_PREFIX}{name}={raw!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcmtwin-serve",
        description="Run the digital twin live and serve the teleop protocol. "
                    f"Every flag can also be set via {ENV_PREFIX}<NAME> "
                    "environment variables.",
    )
    parser.add_argument("--host", default=_env("HOST", "127.0.0.1", str))
    parser.add_argument("--port", type=int, default=_env("PORT", 8972, int),
                        help="TCP newline-JSON port (default %(default)s)")
    parser.add_argument("--http-port", type=int,
                        default=_env("HTTP_PORT", None, int),
                        help="optional WebSocket + static-console port")
    parser.add_argument("--static-dir", default=_env("STATIC_DIR", None, str),
                        help="directory with the built browser console")
    parser.add_argument("--robot", default=_env("ROBOT", None, str),
                        metavar="ROBOT_JSON")
    parser.add_argument("--workspace", "--config", dest="workspace",
                        default=_env("WORKSPACE", None, str),
                        metavar="WORKSPACE_JSON")
    parser.add_argument("--rate", type=float, default=_env("RATE", DEFAULT_CONTROL_RATE, float),
                        help="control rate in Hz (default %(default)s)")
    parser.add_argument("--lookahead", type=float,
                        default=_env("LOOKAHEAD", DEFAULT_LOOKAHEAD, float),
                        help="servo lookahead window in seconds (default %(default)s)")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.rate <= 0 or not math.isfinite(args.rate):
        print("error: --rate must be a positive number")
        return 2
    config = ServiceConfig(
        host=args.host,
        port=args.port,
        http_port=args.http_port,
        static_dir=args.static_dir,
        rate=args.rate,
        lookahead=args.lookahead,
        robot_path=args.robot,
        workspace_path=args.workspace,
    )
    service = TwinService(config=config)
    try:
        asyncio.run(service.serve_forever())
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
