/** DOM entry point: wires the session, keyboard, HUD, and the three panes. */

import { exactNumber, flagNames, speedLabel } from "./hud.js";
import { KEY_BINDINGS, bindingFor } from "./keymap.js";
import { ARMS } from "./protocol.js";
import { drawPane } from "./render.js";
import { PANES, type SceneModel, sceneFromConfig } from "./scene.js";
import { ConsoleSession, type SocketFactory } from "./session.js";

function wsUrl(): string {
  const override = new URLSearchParams(location.search).get("server");
  if (override) return override;
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

const browserSocket: SocketFactory = (url, handlers) => {
  const ws = new WebSocket(url);
  ws.onopen = () => handlers.onOpen();
  ws.onmessage = (ev) => handlers.onMessage(String(ev.data));
  ws.onclose = () => handlers.onClose();
  ws.onerror = () => {};
  return {
    send: (text) => ws.send(text),
    close: () => ws.close(),
  };
};

const session = new ConsoleSession(wsUrl(), browserSocket);

function scheduleReconnect(): void {
  setTimeout(() => {
    if (session.phase === "closed") session.connect();
  }, session.reconnectDelayMs());
}

// Reconnect watchdog: the session flips to "closed" on socket loss; poll it
// from the render loop and schedule exactly one retry per closure.
let reconnectArmed = false;

// -- keyboard ---------------------------------------------------------------

window.addEventListener("keydown", (ev) => {
  if (bindingFor(ev.code)) ev.preventDefault();
  if (ev.repeat) return;
  session.onKey(ev.code, true);
});

window.addEventListener("keyup", (ev) => {
  if (bindingFor(ev.code)) ev.preventDefault();
  session.onKey(ev.code, false);
});

window.addEventListener("blur", () => {
  session.releaseAll();
});

// -- static DOM -------------------------------------------------------------

const el = (id: string) => document.getElementById(id)!;

const canvases = PANES.map((pane) => {
  const canvas = el(`pane-${pane}`) as HTMLCanvasElement;
  return { pane, canvas, ctx: canvas.getContext("2d")! };
});

el("btn-control").addEventListener("click", () => session.requestControl());
for (const arm of ARMS) {
  el(`btn-hold-${arm}`).addEventListener("click", () => session.holdArm(arm));
  el(`btn-resume-${arm}`).addEventListener("click", () => session.resumeArm(arm));
}

function legendHtml(): string {
  const rows: string[] = [];
  for (const arm of ARMS) {
    const keys = Object.entries(KEY_BINDINGS)
      .filter(([, b]) => b.arm === arm)
      .map(([code, b]) => `<span class="key">${code.replace("Key", "")}</span> ${b.label}`)
      .join(" · ");
    rows.push(`<div><strong class="arm-${arm}">${arm}</strong> ${keys}</div>`);
  }
  return rows.join("");
}
el("legend").innerHTML = legendHtml();

// -- render loop --------------------------------------------------------------

let scene: SceneModel | null = null;
let sceneFromWelcome: object | null = null;

function renderHud(now: number): void {
  const conn = el("conn");
  if (session.phase === "live") {
    const stale = session.isStale(now);
    conn.textContent = stale ? "stalled" : "live";
    conn.className = stale ? "badge warn" : "badge ok";
  } else {
    conn.textContent = session.phase === "connecting" ? "connecting…" : "disconnected";
    conn.className = "badge bad";
  }

  const role = el("role");
  role.textContent = session.role ?? "—";
  const banner = el("banner");
  if (session.readOnlyReason === "version") {
    banner.textContent =
      "protocol version mismatch — read-only: rendering continues, input is disabled";
    banner.hidden = false;
  } else if (session.readOnlyReason === "observer") {
    banner.textContent = "observing — another peer holds control";
    banner.hidden = false;
  } else if (session.phase === "closed") {
    banner.textContent = "connection lost — reconnecting, input disabled";
    banner.hidden = false;
  } else {
    banner.hidden = true;
  }
  el("btn-control").toggleAttribute(
    "hidden",
    !(session.phase === "live" && session.readOnlyReason === "observer"),
  );

  const state = session.lastState;
  for (const arm of ARMS) {
    const st = state?.arms[arm];
    const panel = el(`arm-${arm}`);
    if (!st) {
      panel.classList.remove("alert");
      continue;
    }
    panel.classList.toggle("alert", st.flags !== 0 || st.hold);
    el(`rcm-${arm}`).textContent = exactNumber(st.rcm_error_mm);
    el(`speed-${arm}`).textContent = speedLabel(st.speed_level);
    el(`grasp-${arm}`).textContent = st.grasp.toFixed(2);
    const names = flagNames(st.flags);
    el(`flags-${arm}`).textContent = names.length ? names.join(", ") : "—";
  }
  el("tick").textContent = state ? String(state.tick) : "—";
  el("latency").textContent =
    state && state.latency_ms !== null ? `${state.latency_ms.toFixed(2)} ms` : "—";
}

function frame(): void {
  const now = performance.now();
  if (session.welcome && session.welcome.config !== sceneFromWelcome) {
    scene = sceneFromConfig(session.welcome.config);
    sceneFromWelcome = session.welcome.config;
  }
  if (session.phase === "closed" && !reconnectArmed) {
    reconnectArmed = true;
    scheduleReconnect();
  } else if (session.phase !== "closed") {
    reconnectArmed = false;
  }
  if (scene) {
    for (const { pane, canvas, ctx } of canvases) {
      drawPane(ctx, pane, scene, session.lastState, canvas.width, canvas.height);
    }
  }
  renderHud(now);
  requestAnimationFrame(frame);
}

session.connect();
requestAnimationFrame(frame);
