/** Keyboard bindings: one physical key per tool motion, mirrored across arms.
 *
 * Keys are identified by `KeyboardEvent.code` (physical position, layout
 * independent) and translated to the service's canonical key names. Every
 * mapped key sends exactly one command kind per edge — `key_down` on press,
 * `key_up` on release; unmapped keys send nothing.
 */

import type { Arm } from "./protocol.js";

export interface KeyBinding {
  /** Which arm the key steers (also used for the command envelope). */
  arm: Arm;
  /** Canonical key name the service's teleop table expects. */
  wireKey: string;
  /** Short label for the on-screen legend. */
  label: string;
}

/** `KeyboardEvent.code` → binding, covering the full teleop table. */
export const KEY_BINDINGS: Readonly<Record<string, KeyBinding>> = {
  // left arm
  KeyW: { arm: "left", wireKey: "W", label: "insert" },
  KeyS: { arm: "left", wireKey: "S", label: "retract" },
  KeyA: { arm: "left", wireKey: "A", label: "left" },
  KeyD: { arm: "left", wireKey: "D", label: "right" },
  KeyQ: { arm: "left", wireKey: "Q", label: "up" },
  KeyE: { arm: "left", wireKey: "E", label: "down" },
  KeyC: { arm: "left", wireKey: "C", label: "roll cw" },
  KeyX: { arm: "left", wireKey: "X", label: "roll ccw" },
  KeyR: { arm: "left", wireKey: "R", label: "grasp" },
  KeyF: { arm: "left", wireKey: "F", label: "release" },
  ControlLeft: { arm: "left", wireKey: "LCTRL", label: "speed +" },
  AltLeft: { arm: "left", wireKey: "LALT", label: "speed -" },
  // right arm
  KeyI: { arm: "right", wireKey: "I", label: "insert" },
  KeyK: { arm: "right", wireKey: "K", label: "retract" },
  KeyJ: { arm: "right", wireKey: "J", label: "left" },
  KeyL: { arm: "right", wireKey: "L", label: "right" },
  KeyU: { arm: "right", wireKey: "U", label: "up" },
  KeyO: { arm: "right", wireKey: "O", label: "down" },
  KeyM: { arm: "right", wireKey: "M", label: "roll cw" },
  KeyN: { arm: "right", wireKey: "N", label: "roll ccw" },
  KeyY: { arm: "right", wireKey: "Y", label: "grasp" },
  KeyH: { arm: "right", wireKey: "H", label: "release" },
  ControlRight: { arm: "right", wireKey: "RCTRL", label: "speed +" },
  AltRight: { arm: "right", wireKey: "RALT", label: "speed -" },
};

/** Look up the binding for a key event code; `null` for unmapped keys. */
export function bindingFor(code: string): KeyBinding | null {
  return KEY_BINDINGS[code] ?? null;
}
