import { beforeEach, describe, expect, it } from "vitest";

import { PROTOCOL_VERSION } from "../src/protocol.js";
import {
  ConsoleSession,
  STALE_AFTER_MS,
  type SocketFactory,
  type SocketHandlers,
} from "../src/session.js";

const CONFIG = {
  arms: {
    left: { hole: 0, theta0: 0.785, phi0: -1.309, r0: 0.22 },
    right: { hole: 1, theta0: 0.785, phi0: -1.833, r0: 0.22 },
  },
  box_center: [0, 0.45, 0.075],
  box_dims: [0.3, 0.2, 0.15],
  holes: [
    [-0.05, 0.4, 0.15],
    [0.05, 0.4, 0.15],
  ],
  hole_diameter: 0.008,
  tool_diameter: 0.005,
  tool_length: 0.3,
  r_limits: [0.02, 0.29],
  theta_limit: 1.396,
};

function armState(extra: object = {}) {
  return {
    q: [0, -1, 1, 0, 1, 0],
    tip: [-0.064, 0.455, 0.093],
    flange: [-0.206, 0.29, 0.306],
    grasp: 0,
    spin: 0,
    rcm_error_mm: 3.26e-13,
    flags: 0,
    hold: false,
    speed_level: 4,
    ...extra,
  };
}

/** One scripted connection: records sends, lets tests inject server lines. */
class FakeSocket {
  sent: string[] = [];
  closed = false;
  constructor(readonly handlers: SocketHandlers) {}
  send(text: string): void {
    if (this.closed) throw new Error("socket closed");
    this.sent.push(text);
  }
  close(): void {
    this.closed = true;
  }
  // server-side script helpers
  open(): void {
    this.handlers.onOpen();
  }
  push(obj: object): void {
    this.handlers.onMessage(JSON.stringify(obj));
  }
  drop(): void {
    this.closed = true;
    this.handlers.onClose();
  }
  welcome(v = PROTOCOL_VERSION, role: "controller" | "observer" = "controller"): void {
    this.push({ v, type: "welcome", role, rate_hz: 125, lookahead_s: 0.1, config: CONFIG });
  }
  state(arms: { left?: object; right?: object } = {}, extra: object = {}): void {
    this.push({
      v: 1,
      type: "state",
      tick: 100,
      time_s: 0.8,
      arms: { left: armState(arms.left), right: armState(arms.right) },
      flags: 0,
      applied_seq: null,
      latency_ms: null,
      ...extra,
    });
  }
  sentCommands(): Array<Record<string, unknown>> {
    return this.sent.map((t) => JSON.parse(t));
  }
}

let sockets: FakeSocket[];
let clock: { now: number };
let session: ConsoleSession;

const factory: SocketFactory = (_url, handlers) => {
  const s = new FakeSocket(handlers);
  sockets.push(s);
  return s;
};

function live(): FakeSocket {
  session.connect();
  const s = sockets.at(-1)!;
  s.open();
  s.welcome();
  s.state();
  return s;
}

beforeEach(() => {
  sockets = [];
  clock = { now: 1000 };
  session = new ConsoleSession("ws://test/ws", factory);
  session.now = () => clock.now;
});

describe("connection lifecycle", () => {
  it("goes live on the welcome and renders from the first state", () => {
    session.connect();
    expect(session.phase).toBe("connecting");
    const s = sockets[0];
    s.open();
    s.welcome();
    expect(session.phase).toBe("live");
    expect(session.role).toBe("controller");
    expect(session.readOnly).toBe(false);
    s.state();
    expect(session.lastState?.arms.left.tip).toEqual([-0.064, 0.455, 0.093]);
  });

  it("keeps the last snapshot for rendering after a disconnect, but disables input", () => {
    const s = live();
    s.drop();
    expect(session.phase).toBe("closed");
    expect(session.lastState).not.toBeNull();
    expect(session.onKey("KeyW", true)).toEqual({ sent: null, reason: "disconnected" });
  });

  it("backs off exponentially between reconnect attempts, capped", () => {
    const s = live();
    s.drop();
    expect(session.reconnectDelayMs()).toBe(500);
    session.connect();
    sockets.at(-1)!.drop();
    expect(session.reconnectDelayMs()).toBe(1000);
    for (let i = 0; i < 8; i++) {
      session.connect();
      sockets.at(-1)!.drop();
    }
    expect(session.reconnectDelayMs()).toBe(8000);
  });

  it("resets the backoff and the command sequence on a fresh welcome", () => {
    const s1 = live();
    session.onKey("KeyW", true);
    session.onKey("KeyW", false);
    expect(s1.sentCommands().map((c) => c.seq)).toEqual([1, 2]);
    s1.drop();
    session.connect();
    const s2 = sockets.at(-1)!;
    s2.open();
    s2.welcome();
    s2.state();
    expect(session.reconnectDelayMs()).toBe(500);
    const r = session.onKey("KeyW", true);
    expect(r.sent?.seq).toBe(1);
  });

  it("drops held keys on disconnect instead of replaying them", () => {
    const s1 = live();
    session.onKey("KeyW", true);
    expect(session.heldKeys()).toEqual(["KeyW"]);
    s1.drop();
    expect(session.heldKeys()).toEqual([]);
    // the release after reconnect is a stray, not a key_up
    session.connect();
    const s2 = sockets.at(-1)!;
    s2.open();
    s2.welcome();
    expect(session.onKey("KeyW", false)).toEqual({ sent: null, reason: "stray-release" });
  });

  it("ignores malformed server lines without dropping the session", () => {
    const s = live();
    s.handlers.onMessage('{"v":1,"type":"state"');
    s.handlers.onMessage("[]");
    expect(session.phase).toBe("live");
    expect(session.lastState).not.toBeNull();
  });
});

describe("key input", () => {
  it("sends exactly one key_down per press and one key_up per release", () => {
    const s = live();
    const down = session.onKey("KeyI", true);
    expect(down.sent).toMatchObject({
      kind: "key_down",
      arm: "right",
      payload: { key: "I" },
    });
    const up = session.onKey("KeyI", false);
    expect(up.sent).toMatchObject({ kind: "key_up", payload: { key: "I" } });
    expect(s.sent).toHaveLength(2);
  });

  it("swallows auto-repeat presses and stray releases", () => {
    const s = live();
    session.onKey("KeyW", true);
    expect(session.onKey("KeyW", true)).toEqual({ sent: null, reason: "repeat" });
    session.onKey("KeyW", false);
    expect(session.onKey("KeyW", false)).toEqual({ sent: null, reason: "stray-release" });
    expect(s.sent).toHaveLength(2);
  });

  it("sends nothing for unmapped keys", () => {
    const s = live();
    expect(session.onKey("Space", true)).toEqual({ sent: null, reason: "unmapped" });
    expect(s.sent).toHaveLength(0);
  });

  it("sends nothing before the welcome", () => {
    session.connect();
    sockets[0].open();
    expect(session.onKey("KeyW", true)).toEqual({ sent: null, reason: "disconnected" });
  });

  it("releases everything held on demand (window blur)", () => {
    const s = live();
    session.onKey("KeyW", true);
    session.onKey("KeyJ", true);
    const released = session.releaseAll();
    expect(released.map((c) => c.kind)).toEqual(["key_up", "key_up"]);
    expect(session.heldKeys()).toEqual([]);
    expect(s.sent).toHaveLength(4);
  });
});

describe("read-only sessions", () => {
  it("blocks keys for observers but still lets them request control", () => {
    session.connect();
    const s = sockets[0];
    s.open();
    s.welcome(PROTOCOL_VERSION, "observer");
    s.state();
    expect(session.readOnlyReason).toBe("observer");
    expect(session.onKey("KeyW", true)).toEqual({ sent: null, reason: "read-only" });
    const req = session.requestControl();
    expect(req).toMatchObject({ kind: "session", payload: { verb: "start" } });
    expect(s.sent).toHaveLength(1);
  });

  it("treats a protocol version mismatch as read-only but keeps rendering", () => {
    session.connect();
    const s = sockets[0];
    s.open();
    s.welcome(PROTOCOL_VERSION + 1);
    s.state();
    expect(session.readOnlyReason).toBe("version");
    expect(session.onKey("KeyW", true)).toEqual({ sent: null, reason: "read-only" });
    expect(session.lastState).not.toBeNull();
    expect(session.setSpeed("left", 6)).toBeNull();
  });

  it("promotes to controller on the re-welcome after taking over", () => {
    session.connect();
    const s = sockets[0];
    s.open();
    s.welcome(PROTOCOL_VERSION, "observer");
    session.requestControl();
    s.welcome(PROTOCOL_VERSION, "controller");
    expect(session.readOnly).toBe(false);
    expect(session.onKey("KeyW", true).sent).not.toBeNull();
  });
});

describe("safety gating", () => {
  it("ignores new presses for a flagged arm while the other arm stays live", () => {
    const s = live();
    s.state({ left: { flags: 64, hold: true } });
    expect(session.armGated("left")).toBe(true);
    expect(session.armGated("right")).toBe(false);
    expect(session.onKey("KeyW", true)).toEqual({ sent: null, reason: "safety" });
    expect(session.onKey("KeyI", true).sent).not.toBeNull();
  });

  it("gates on any flag bit even without a latched hold", () => {
    const s = live();
    s.state({ right: { flags: 128 } });
    expect(session.onKey("KeyI", true)).toEqual({ sent: null, reason: "safety" });
  });

  it("still lets a held key be released after its arm trips", () => {
    const s = live();
    session.onKey("KeyW", true);
    s.state({ left: { flags: 64, hold: true } });
    const up = session.onKey("KeyW", false);
    expect(up.sent).toMatchObject({ kind: "key_up", payload: { key: "W" } });
  });

  it("sends hold/resume verbs for the requested arm", () => {
    const s = live();
    session.holdArm("right");
    session.resumeArm("right");
    expect(s.sentCommands().map((c) => [c.kind, (c.payload as any).verb, c.arm])).toEqual([
      ["session", "hold", "right"],
      ["session", "resume", "right"],
    ]);
  });
});

describe("staleness", () => {
  it("flags the view once no snapshot arrived for 100 ms", () => {
    const s = live();
    clock.now = 2000;
    s.state();
    expect(session.isStale(2000 + STALE_AFTER_MS)).toBe(false);
    expect(session.isStale(2000 + STALE_AFTER_MS + 1)).toBe(true);
    s.state();
    // a fresh snapshot clears it — lastStateAt is re-anchored at now
    expect(session.isStale(clock.now + 10)).toBe(false);
  });

  it("does not report stale before any state or while disconnected", () => {
    expect(session.isStale(99999)).toBe(false);
    const s = live();
    s.drop();
    expect(session.isStale(clock.now + 10_000)).toBe(false);
  });
});

describe("render honesty", () => {
  it("stores the snapshot verbatim: the displayed pivot error is the wire double", () => {
    const s = live();
    s.state({ left: { rcm_error_mm: 1.689013998097666e-6 } });
    const shown = String(session.lastState!.arms.left.rcm_error_mm);
    expect(Number(shown)).toBe(1.689013998097666e-6);
  });

  it("records nacks for the HUD", () => {
    const s = live();
    s.push({ v: 1, type: "nack", seq: 9, error: "seq_gap", detail: "expected 2" });
    expect(session.lastNack?.error).toBe("seq_gap");
  });
});
