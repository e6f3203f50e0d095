/** Wire messages exchanged with the twin service (newline-delimited JSON).
 *
 * The console is a strict writer and a tolerant reader: outgoing commands
 * carry exactly the documented fields, incoming messages are validated just
 * enough to render safely and unknown fields are ignored.
 */

export const PROTOCOL_VERSION = 1;

export type Vec3 = [number, number, number];
export type Arm = "left" | "right";
export const ARMS: readonly Arm[] = ["left", "right"];

export interface ArmConfig {
  hole: number;
  theta0: number;
  phi0: number;
  r0: number;
}

export interface WelcomeConfig {
  arms: Record<string, ArmConfig>;
  box_center: Vec3;
  box_dims: Vec3;
  holes: Vec3[];
  hole_diameter: number;
  tool_diameter: number;
  tool_length: number;
  r_limits: [number, number];
  theta_limit: number;
}

export interface WelcomeMessage {
  type: "welcome";
  v: number;
  role: "controller" | "observer";
  rate_hz: number;
  lookahead_s: number;
  config: WelcomeConfig;
}

export interface ArmState {
  q: number[];
  tip: Vec3;
  flange: Vec3;
  grasp: number;
  spin: number;
  rcm_error_mm: number;
  flags: number;
  hold: boolean;
  speed_level: number;
}

export interface StateMessage {
  type: "state";
  v: number;
  tick: number;
  time_s: number;
  arms: Record<string, ArmState>;
  flags: number;
  applied_seq: number | null;
  latency_ms: number | null;
}

export interface NackMessage {
  type: "nack";
  v: number;
  seq: number | null;
  error: string;
  detail?: string;
}

export type ServerMessage = WelcomeMessage | StateMessage | NackMessage;

export type ParseResult =
  | { ok: true; message: ServerMessage }
  | { ok: false; reason: string };

export type SessionVerb = "start" | "hold" | "resume" | "set_speed";

export interface CommandMessage {
  v: number;
  type: "command";
  seq: number;
  arm: Arm;
  kind: "key_down" | "key_up" | "session";
  payload: Record<string, unknown>;
}

const isNum = (x: unknown): x is number => typeof x === "number" && Number.isFinite(x);
const isVec3 = (x: unknown): x is Vec3 =>
  Array.isArray(x) && x.length === 3 && x.every(isNum);
const isRecord = (x: unknown): x is Record<string, unknown> =>
  typeof x === "object" && x !== null && !Array.isArray(x);

function validArmState(a: unknown): a is ArmState {
  if (!isRecord(a)) return false;
  return (
    Array.isArray(a.q) && a.q.every(isNum) &&
    isVec3(a.tip) && isVec3(a.flange) &&
    isNum(a.grasp) && isNum(a.spin) &&
    isNum(a.rcm_error_mm) && isNum(a.flags) &&
    typeof a.hold === "boolean" && isNum(a.speed_level)
  );
}

function validConfig(c: unknown): c is WelcomeConfig {
  if (!isRecord(c)) return false;
  if (!isVec3(c.box_center) || !isVec3(c.box_dims)) return false;
  if (!Array.isArray(c.holes) || !c.holes.every(isVec3)) return false;
  if (!isNum(c.tool_length)) return false;
  if (!isRecord(c.arms)) return false;
  for (const arm of Object.values(c.arms)) {
    if (!isRecord(arm) || !isNum(arm.hole)) return false;
    const hole = arm.hole as number;
    if (!Number.isInteger(hole) || hole < 0 || hole >= c.holes.length) return false;
  }
  return true;
}

/** Parse one server line/WS text frame into a typed message.
 *
 * Returns `{ok: false}` for anything the console cannot act on; the caller
 * decides whether that is fatal (it never is — bad frames are skipped).
 * A welcome with an unexpected `v` still parses: version policy (read-only
 * banner) is the session's call, not the parser's.
 */
export function parseServerMessage(data: string): ParseResult {
  let raw: unknown;
  try {
    raw = JSON.parse(data);
  } catch {
    return { ok: false, reason: "not valid JSON" };
  }
  if (!isRecord(raw)) return { ok: false, reason: "not a JSON object" };
  if (!isNum(raw.v) || !Number.isInteger(raw.v)) return { ok: false, reason: "missing version" };
  switch (raw.type) {
    case "welcome": {
      if (raw.role !== "controller" && raw.role !== "observer")
        return { ok: false, reason: "welcome without role" };
      if (!validConfig(raw.config)) return { ok: false, reason: "welcome config malformed" };
      if (!isNum(raw.rate_hz) || raw.rate_hz <= 0)
        return { ok: false, reason: "welcome rate malformed" };
      return { ok: true, message: raw as unknown as WelcomeMessage };
    }
    case "state": {
      if (!isNum(raw.tick) || !isNum(raw.time_s) || !isNum(raw.flags))
        return { ok: false, reason: "state header malformed" };
      if (!isRecord(raw.arms)) return { ok: false, reason: "state without arms" };
      for (const st of Object.values(raw.arms))
        if (!validArmState(st)) return { ok: false, reason: "arm state malformed" };
      return { ok: true, message: raw as unknown as StateMessage };
    }
    case "nack": {
      if (typeof raw.error !== "string") return { ok: false, reason: "nack without error" };
      return { ok: true, message: raw as unknown as NackMessage };
    }
    default:
      return { ok: false, reason: `unknown type ${JSON.stringify(raw.type)}` };
  }
}

export function keyCommand(seq: number, arm: Arm, key: string, pressed: boolean): CommandMessage {
  return {
    v: PROTOCOL_VERSION,
    type: "command",
    seq,
    arm,
    kind: pressed ? "key_down" : "key_up",
    payload: { key },
  };
}

export function sessionCommand(
  seq: number,
  arm: Arm,
  verb: SessionVerb,
  level?: number,
): CommandMessage {
  const payload: Record<string, unknown> = { verb };
  if (verb === "set_speed") payload.level = level;
  return { v: PROTOCOL_VERSION, type: "command", seq, arm, kind: "session", payload };
}

export function encodeCommand(cmd: CommandMessage): string {
  return JSON.stringify(cmd);
}
