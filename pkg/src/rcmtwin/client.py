"""Small synchronous TCP client for the teleop service.

Intended for scripts and tests; it hides the line framing and sequence
numbering, nothing else.  All messages are plain dicts from
`rcmtwin.protocol`.
"""

from __future__ import annotations

import socket

from .errors import ProtocolDecodeError
from .protocol import (
    decode_line,
    encode,
    make_key_command,
    make_session_command,
    make_stylus_command,
)

__all__ = ["TwinClient"]


class TwinClient:
    """Blocking newline-JSON client; reads the welcome on connect."""

    def __init__(self, host: str = "127.0.0.1", port: int = 8972,
                 timeout: float = 5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self._sock.makefile("rb")
        self.seq = -1
        self.welcome = self.next_message()
        if self.welcome.get("type") != "welcome":
            raise ProtocolDecodeError("expected a welcome message", field="type")

    @property
    def role(self) -> str:
        return self.welcome["role"]

    # -- receiving ----------------------------------------------------------

    def next_message(self) -> dict:
        line = self._file.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return decode_line(line)

    def next_state(self) -> dict:
        """Skip forward to the next per-tick state broadcast."""
        while True:
            msg = self.next_message()
            if msg["type"] == "state":
                return msg

    def drain_nacks(self, until_type: str = "state") -> list[dict]:
        """Collect nacks until the next message of ``until_type`` arrives."""
        nacks = []
        while True:
            msg = self.next_message()
            if msg["type"] == "nack":
                nacks.append(msg)
            elif msg["type"] == until_type:
                self._last = msg
                return nacks

    # -- sending ------------------------------------------------------------

    def send(self, message: dict) -> int:
        self._sock.sendall(encode(message))
        return message.get("seq", -1)

    def _next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def key(self, key: str, pressed: bool, arm: str = "left") -> int:
        return self.send(make_key_command(self._next_seq(), arm, key, pressed))

    def stylus(self, arm: str, position, orientation, button1: bool,
               button2: bool, timestamp: float) -> int:
        return self.send(make_stylus_command(
            self._next_seq(), arm, position, orientation, button1, button2,
            timestamp,
        ))

    def session(self, verb: str, arm: str = "left", level: int | None = None) -> int:
        return self.send(make_session_command(self._next_seq(), arm, verb, level))

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "TwinClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
