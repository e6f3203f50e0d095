/** Formatting for the numeric readouts.
 *
 * Displayed quantities are pass-throughs from the last snapshot; the only
 * transformation allowed is *lossless* number-to-text conversion.
 */

/** Safety / status bits as broadcast in `state.arms.<arm>.flags`. */
export const FLAG_NAMES: readonly [number, string][] = [
  [1, "pivot"],
  [2, "joint-limit"],
  [4, "speed"],
  [8, "singularity"],
  [16, "configuration"],
  [32, "unreachable"],
  [64, "collision"],
  [128, "workspace-clamp"],
  [256, "hold"],
];

export function flagNames(flags: number): string[] {
  const names: string[] = [];
  for (const [bit, name] of FLAG_NAMES) {
    if (flags & bit) names.push(name);
  }
  return names;
}

/** Bits that indicate a safety stop rather than routine clamping. */
export function isSafetyStop(flags: number, hold: boolean): boolean {
  return hold || flags !== 0;
}

/** Render a snapshot float exactly: the shortest decimal string that parses
 * back to the identical double, so the display is bit-exact with the wire. */
export function exactNumber(x: number): string {
  return String(x);
}

/** Tip speed multiplier for a ladder level (level 4 = ×1). */
export function speedFactor(level: number): number {
  return 0.25 * 2 ** (level / 2);
}

export function speedLabel(level: number): string {
  const factor = speedFactor(level);
  const rounded = factor >= 1 ? factor.toFixed(1) : factor.toFixed(2);
  return `${level} (×${rounded})`;
}
