/** Static scene geometry and orthographic pane projections.
 *
 * Everything rendered is derived from the one-time welcome config (box,
 * holes, tool dimensions) plus the latest state snapshot (flange/tip
 * endpoints). The console does no kinematics: a tool is drawn as the
 * straight segment between the flange and tip positions reported by the
 * service, which passes through its fulcrum hole exactly when the reported
 * pivot error is small.
 */

import type { Vec3, WelcomeConfig } from "./protocol.js";

export interface SceneModel {
  boxCenter: Vec3;
  boxDims: Vec3;
  holes: Vec3[];
  /** Fulcrum position per arm, resolved from the config's hole index. */
  armHoles: Record<string, Vec3>;
  toolLength: number;
  toolDiameter: number;
  holeDiameter: number;
}

export function sceneFromConfig(config: WelcomeConfig): SceneModel {
  const armHoles: Record<string, Vec3> = {};
  for (const [name, arm] of Object.entries(config.arms)) {
    armHoles[name] = config.holes[arm.hole];
  }
  return {
    boxCenter: config.box_center,
    boxDims: config.box_dims,
    holes: config.holes,
    armHoles,
    toolLength: config.tool_length,
    toolDiameter: config.tool_diameter,
    holeDiameter: config.hole_diameter,
  };
}

export type Pane = "top" | "front" | "side";
export const PANES: readonly Pane[] = ["top", "front", "side"];

/** Human axis labels per pane: [horizontal, vertical]. */
export const PANE_AXES: Record<Pane, [string, string]> = {
  top: ["x", "y"],
  front: ["x", "z"],
  side: ["y", "z"],
};

/** Drop one world axis: top view keeps (x,y), front (x,z), side (y,z). */
export function project(p: Vec3, pane: Pane): [number, number] {
  switch (pane) {
    case "top":
      return [p[0], p[1]];
    case "front":
      return [p[0], p[2]];
    case "side":
      return [p[1], p[2]];
  }
}

export interface Bounds {
  min: Vec3;
  max: Vec3;
}

/** World-space volume every pane keeps in frame: the box plus enough
 * headroom above the holes for a fully retracted tool shaft. */
export function viewBounds(scene: SceneModel): Bounds {
  const min: Vec3 = [...scene.boxCenter] as Vec3;
  const max: Vec3 = [...scene.boxCenter] as Vec3;
  for (let i = 0; i < 3; i++) {
    min[i] -= scene.boxDims[i] / 2;
    max[i] += scene.boxDims[i] / 2;
  }
  for (const hole of scene.holes) {
    for (let i = 0; i < 3; i++) {
      min[i] = Math.min(min[i], hole[i] - scene.toolLength * 0.4);
      max[i] = Math.max(max[i], hole[i] + scene.toolLength * 0.4);
    }
  }
  return { min, max };
}

/** Uniform world→pixel mapping for one pane (orthographic, y-up). */
export interface PaneTransform {
  scale: number;
  /** pixel x of plane-u origin */
  ox: number;
  /** pixel y of plane-v origin (before the downward flip) */
  oy: number;
  heightPx: number;
}

export function paneTransform(
  bounds: Bounds,
  pane: Pane,
  widthPx: number,
  heightPx: number,
  marginPx = 16,
): PaneTransform {
  const [uMin, vMin] = project(bounds.min, pane);
  const [uMax, vMax] = project(bounds.max, pane);
  const spanU = uMax - uMin;
  const spanV = vMax - vMin;
  const scale = Math.min(
    (widthPx - 2 * marginPx) / spanU,
    (heightPx - 2 * marginPx) / spanV,
  );
  const ox = (widthPx - spanU * scale) / 2 - uMin * scale;
  const oy = (heightPx - spanV * scale) / 2 - vMin * scale;
  return { scale, ox, oy, heightPx };
}

/** Map a world point to canvas pixels in the given pane. */
export function toPixels(p: Vec3, pane: Pane, t: PaneTransform): [number, number] {
  const [u, v] = project(p, pane);
  return [t.ox + u * t.scale, t.heightPx - (t.oy + v * t.scale)];
}

/** Distance from a point to a segment, in whatever 2D units both use. */
export function pointSegmentDistance(
  p: [number, number],
  a: [number, number],
  b: [number, number],
): number {
  const abx = b[0] - a[0];
  const aby = b[1] - a[1];
  const apx = p[0] - a[0];
  const apy = p[1] - a[1];
  const len2 = abx * abx + aby * aby;
  const t = len2 === 0 ? 0 : Math.max(0, Math.min(1, (apx * abx + apy * aby) / len2));
  const dx = apx - t * abx;
  const dy = apy - t * aby;
  return Math.hypot(dx, dy);
}
