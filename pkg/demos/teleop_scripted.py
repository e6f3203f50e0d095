#!/usr/bin/env python3
"""Drive both virtual tools from a scripted key timeline, offline.

Usage:  python3 demos/teleop_scripted.py

Shows the whole control pipeline without any networking: key edges feed a
TeleopSession, the session folds held keys into per-tick spherical
increments, and the twin turns those into joint motion under the fulcrum
constraint.  Every 0.5 s of simulated time it prints each arm's tip position,
insertion depth, and pivot error.
"""

from rcmtwin import DigitalTwin, TeleopSession

# (tick, key, pressed): insert both tools, sweep the left one sideways while
# the right one pans, then retract and close the right grasper.
TIMELINE = [
    (0, "W", True), (0, "I", True),          # both tools in
    (188, "W", False), (188, "A", True),     # left: stop inserting, go left
    (188, "I", False), (188, "L", True),     # right: pan right
    (375, "A", False), (375, "L", False),
    (375, "S", True), (375, "K", True),      # both tools back out
    (563, "S", False), (563, "K", False),
    (563, "Y", True),                        # right grasper closes
    (740, "Y", False),
]
TICKS = 750


def main() -> None:
    twin = DigitalTwin()
    session = TeleopSession()
    events = {}
    for tick, key, pressed in TIMELINE:
        events.setdefault(tick, []).append((key, pressed))

    print(f"{'time':>6s}  {'arm':5s} {'tip x/y/z (mm)':>26s} "
          f"{'depth (mm)':>10s} {'rcm err (mm)':>12s} {'grasp':>6s}")
    for k in range(TICKS):
        for key, pressed in events.get(k, []):
            session.key_event(key, pressed)
        snaps = twin.tick(session.step(twin, twin.dt))
        if k % 63 == 0 or k == TICKS - 1:
            for name, snap in snaps.items():
                x, y, z = (v * 1e3 for v in snap.tip)
                depth = (twin.frame(name).tool_length - snap.spherical.r) * 1e3
                print(f"{snap.time_s:6.2f}  {name:5s} "
                      f"{x:8.2f}/{y:8.2f}/{z:8.2f} {depth:10.2f} "
                      f"{snap.rcm_error_mm:12.2e} {snap.grasp:6.2f}")
    print("\nThe pivot error stays at numerical noise: the fulcrum constraint "
          "is enforced by construction, not by feedback.")


if __name__ == "__main__":
    main()
