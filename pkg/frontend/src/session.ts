/** Connection + input state machine for one console window.
 *
 * Owns the socket lifecycle (connect → welcome → live stream → close →
 * backoff), the per-connection command sequence, and every rule about
 * whether a key event may become a command:
 *
 *  - nothing is sent while disconnected or before the welcome;
 *  - observers and version-mismatched sessions are read-only (rendering
 *    continues, input is dropped) except for the "take control" request;
 *  - an arm with a safety flag or latched hold ignores new presses, but a
 *    release for a key already held always goes through;
 *  - auto-repeat presses and stray releases are swallowed client-side.
 *
 * The session keeps no derived state: just the last welcome, the last
 * snapshot verbatim, and the set of keys currently held.
 */

import { bindingFor } from "./keymap.js";
import {
  type Arm,
  type CommandMessage,
  type NackMessage,
  PROTOCOL_VERSION,
  type StateMessage,
  type WelcomeMessage,
  encodeCommand,
  keyCommand,
  parseServerMessage,
  sessionCommand,
} from "./protocol.js";

/** Snapshots older than this render the stale indicator. */
export const STALE_AFTER_MS = 100;

const BACKOFF_BASE_MS = 500;
const BACKOFF_MAX_MS = 8000;

export interface SocketHandlers {
  onOpen(): void;
  onMessage(text: string): void;
  onClose(): void;
}

export interface SocketHandle {
  send(text: string): void;
  close(): void;
}

export type SocketFactory = (url: string, handlers: SocketHandlers) => SocketHandle;

export type Phase = "idle" | "connecting" | "live" | "closed";

export type ReadOnlyReason = "observer" | "version" | null;

/** Why a key event was dropped instead of sent. */
export type GateReason =
  | "unmapped"
  | "disconnected"
  | "read-only"
  | "safety"
  | "repeat"
  | "stray-release";

export interface KeyResult {
  sent: CommandMessage | null;
  reason?: GateReason;
}

export class ConsoleSession {
  private readonly url: string;
  private readonly createSocket: SocketFactory;
  private socket: SocketHandle | null = null;

  phase: Phase = "idle";
  welcome: WelcomeMessage | null = null;
  lastState: StateMessage | null = null;
  lastStateAtMs: number | null = null;
  lastNack: NackMessage | null = null;
  /** Consecutive failed/closed connections, for backoff. */
  private attempts = 0;
  private seq = 0;
  private readonly held = new Map<string, Arm>();

  constructor(url: string, createSocket: SocketFactory) {
    this.url = url;
    this.createSocket = createSocket;
  }

  // -- lifecycle ------------------------------------------------------------

  connect(): void {
    this.phase = "connecting";
    this.socket = this.createSocket(this.url, {
      onOpen: () => {},
      onMessage: (text) => this.handleMessage(text),
      onClose: () => this.handleClose(),
    });
  }

  private handleClose(): void {
    this.phase = "closed";
    this.socket = null;
    this.held.clear();
    this.attempts += 1;
  }

  /** Delay before the next reconnect attempt (exponential, capped). */
  reconnectDelayMs(): number {
    const shift = Math.max(0, this.attempts - 1);
    return Math.min(BACKOFF_MAX_MS, BACKOFF_BASE_MS * 2 ** shift);
  }

  private handleMessage(text: string): void {
    const parsed = parseServerMessage(text);
    if (!parsed.ok) return;
    const msg = parsed.message;
    switch (msg.type) {
      case "welcome":
        this.welcome = msg;
        this.phase = "live";
        this.seq = 0;
        this.attempts = 0;
        this.held.clear();
        break;
      case "state":
        this.lastState = msg;
        this.lastStateAtMs = this.now();
        break;
      case "nack":
        this.lastNack = msg;
        break;
    }
  }

  /** Clock hook; tests override. */
  now: () => number = () => Date.now();

  // -- status for the HUD -----------------------------------------------------

  get role(): "controller" | "observer" | null {
    return this.welcome?.role ?? null;
  }

  get readOnlyReason(): ReadOnlyReason {
    if (!this.welcome) return null;
    if (this.welcome.v !== PROTOCOL_VERSION) return "version";
    if (this.welcome.role !== "controller") return "observer";
    return null;
  }

  get readOnly(): boolean {
    return this.readOnlyReason !== null;
  }

  isStale(nowMs: number): boolean {
    if (this.phase !== "live" || this.lastStateAtMs === null) return false;
    return nowMs - this.lastStateAtMs > STALE_AFTER_MS;
  }

  /** True when `arm`'s input is suspended by a safety flag or latched hold. */
  armGated(arm: Arm): boolean {
    const st = this.lastState?.arms[arm];
    if (!st) return false;
    return st.flags !== 0 || st.hold;
  }

  heldKeys(): readonly string[] {
    return [...this.held.keys()];
  }

  // -- input ----------------------------------------------------------------

  /** Translate one keyboard edge into at most one command. */
  onKey(code: string, pressed: boolean): KeyResult {
    const binding = bindingFor(code);
    if (!binding) return { sent: null, reason: "unmapped" };
    if (pressed && this.held.has(code)) return { sent: null, reason: "repeat" };
    if (!pressed && !this.held.has(code)) return { sent: null, reason: "stray-release" };
    if (this.phase !== "live") return { sent: null, reason: "disconnected" };
    if (this.readOnly) return { sent: null, reason: "read-only" };
    // A flagged arm accepts no new presses, but a key already held may —
    // must — still be released.
    if (pressed && this.armGated(binding.arm)) return { sent: null, reason: "safety" };
    const cmd = keyCommand(this.nextSeq(), binding.arm, binding.wireKey, pressed);
    if (!this.trySend(cmd)) return { sent: null, reason: "disconnected" };
    if (pressed) this.held.set(code, binding.arm);
    else this.held.delete(code);
    return { sent: cmd };
  }

  /** Send key_up for everything held (window blur, page hide). */
  releaseAll(): CommandMessage[] {
    const released: CommandMessage[] = [];
    for (const code of [...this.held.keys()]) {
      const r = this.onKey(code, false);
      if (r.sent) released.push(r.sent);
    }
    this.held.clear();
    return released;
  }

  /** Ask for the controller slot (allowed even while read-only). */
  requestControl(): CommandMessage | null {
    if (this.phase !== "live") return null;
    const cmd = sessionCommand(this.nextSeq(), "left", "start");
    return this.trySend(cmd) ? cmd : null;
  }

  setSpeed(arm: Arm, level: number): CommandMessage | null {
    return this.sendVerb(sessionCommand(this.nextSeq(), arm, "set_speed", level));
  }

  holdArm(arm: Arm): CommandMessage | null {
    return this.sendVerb(sessionCommand(this.nextSeq(), arm, "hold"));
  }

  resumeArm(arm: Arm): CommandMessage | null {
    return this.sendVerb(sessionCommand(this.nextSeq(), arm, "resume"));
  }

  private sendVerb(cmd: CommandMessage): CommandMessage | null {
    if (this.phase !== "live" || this.readOnly) return null;
    return this.trySend(cmd) ? cmd : null;
  }

  private nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  private trySend(cmd: CommandMessage): boolean {
    if (!this.socket) return false;
    try {
      this.socket.send(encodeCommand(cmd));
      return true;
    } catch {
      return false;
    }
  }
}
