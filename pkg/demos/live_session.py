#!/usr/bin/env python3
"""Run the service, connect as a client, and teleoperate over the wire.

Usage:  python3 demos/live_session.py

Starts the TCP service on an ephemeral port in a background thread, connects
the bundled client, and exercises the remote pathway end to end: welcome
handshake, a held insertion key, a speed change, a sequence-gap nack, and a
hold/resume cycle — printing what comes back each step.
"""

import asyncio
import threading
import time

from rcmtwin import ServiceConfig, TwinClient, TwinService


def start_service() -> tuple[TwinService, asyncio.AbstractEventLoop]:
    service = TwinService(config=ServiceConfig(host="127.0.0.1", port=0))
    loop = asyncio.new_event_loop()
    started = threading.Event()

    def run():
        asyncio.set_event_loop(loop)
        loop.run_until_complete(service.start())
        started.set()
        loop.run_forever()

    threading.Thread(target=run, daemon=True).start()
    started.wait(10.0)
    return service, loop


def main() -> None:
    service, loop = start_service()
    print(f"service listening on tcp://127.0.0.1:{service.tcp_port}")

    with TwinClient("127.0.0.1", service.tcp_port) as client:
        print(f"connected as {client.role}; "
              f"rate {client.welcome['rate_hz']:.0f} Hz, "
              f"{len(client.welcome['config']['holes'])} holes in the box")

        tip0 = client.next_state()["arms"]["left"]["tip"]
        print(f"left tip at rest: {[round(v, 4) for v in tip0]}")

        print("\nholding W (left tool in) for half a second of wall time...")
        client.key("W", pressed=True)
        time.sleep(0.5)
        seq = client.key("W", pressed=False)
        while True:  # skip the states buffered while we slept
            state = client.next_state()
            if (state["applied_seq"] or -1) >= seq:
                break
        for _ in range(30):  # and let the servo settle on the frozen target
            state = client.next_state()
        tip1 = state["arms"]["left"]["tip"]
        moved = sum((a - b) ** 2 for a, b in zip(tip0, tip1)) ** 0.5
        print(f"tip moved {moved * 1e3:.2f} mm; "
              f"pivot error {state['arms']['left']['rcm_error_mm']:.2e} mm")

        print("\nstepping the left speed ladder to level 6...")
        seq = client.session("set_speed", level=6)
        while True:
            state = client.next_state()
            if (state["applied_seq"] or -1) >= seq:
                break
        print(f"state now reports speed_level="
              f"{state['arms']['left']['speed_level']}")

        print("\nskipping ahead in the sequence on purpose...")
        client.seq += 5
        client.session("hold", arm="left")
        for _ in range(200):
            msg = client.next_message()
            if msg["type"] == "nack":
                print(f"server nacked: {msg['error']} ({msg['detail']}) — "
                      "but a gap is a warning, the command still applied:")
                break
        while not client.next_state()["arms"]["left"]["hold"]:
            pass
        print("left arm is holding; resuming...")
        client.session("resume", arm="left")
        while client.next_state()["arms"]["left"]["hold"]:
            pass
        print("left arm released.")

    loop.call_soon_threadsafe(loop.stop)
    print("\ndone.")


if __name__ == "__main__":
    main()
