/** Canvas drawing for one orthographic pane.
 *
 * Draws only what the data says: the box and holes from the config, and per
 * arm the straight flange→tip segment, tip marker, and fulcrum ring from the
 * latest snapshot. A flagged or held arm is drawn in the alert color.
 */

import { isSafetyStop } from "./hud.js";
import type { StateMessage, Vec3 } from "./protocol.js";
import {
  type Bounds,
  type Pane,
  PANE_AXES,
  type PaneTransform,
  type SceneModel,
  paneTransform,
  toPixels,
  viewBounds,
} from "./scene.js";

const COLORS = {
  background: "#10151c",
  frame: "#2a3442",
  box: "#3f4f63",
  boxFill: "rgba(63, 79, 99, 0.12)",
  hole: "#8fa3bd",
  label: "#66788f",
  arms: { left: "#4fc3f7", right: "#ffb74d" } as Record<string, string>,
  alert: "#ef5350",
  tip: "#ffffff",
};

function boxCorners(scene: SceneModel): Vec3[] {
  const c = scene.boxCenter;
  const d = scene.boxDims;
  const corners: Vec3[] = [];
  for (const sx of [-1, 1])
    for (const sy of [-1, 1])
      for (const sz of [-1, 1])
        corners.push([c[0] + (sx * d[0]) / 2, c[1] + (sy * d[1]) / 2, c[2] + (sz * d[2]) / 2]);
  return corners;
}

function paneRect(scene: SceneModel, pane: Pane, t: PaneTransform): [number, number, number, number] {
  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const corner of boxCorners(scene)) {
    const [px, py] = toPixels(corner, pane, t);
    xMin = Math.min(xMin, px);
    xMax = Math.max(xMax, px);
    yMin = Math.min(yMin, py);
    yMax = Math.max(yMax, py);
  }
  return [xMin, yMin, xMax - xMin, yMax - yMin];
}

export function drawPane(
  ctx: CanvasRenderingContext2D,
  pane: Pane,
  scene: SceneModel,
  state: StateMessage | null,
  widthPx: number,
  heightPx: number,
): void {
  ctx.clearRect(0, 0, widthPx, heightPx);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, widthPx, heightPx);

  const bounds: Bounds = viewBounds(scene);
  const t = paneTransform(bounds, pane, widthPx, heightPx);

  // training box
  const [bx, by, bw, bh] = paneRect(scene, pane, t);
  ctx.fillStyle = COLORS.boxFill;
  ctx.fillRect(bx, by, bw, bh);
  ctx.strokeStyle = COLORS.box;
  ctx.lineWidth = 1.5;
  ctx.strokeRect(bx, by, bw, bh);

  // fulcrum holes
  const holeR = Math.max(2.5, (scene.holeDiameter / 2) * t.scale);
  for (const hole of scene.holes) {
    const [hx, hy] = toPixels(hole, pane, t);
    ctx.beginPath();
    ctx.arc(hx, hy, holeR, 0, Math.PI * 2);
    ctx.strokeStyle = COLORS.hole;
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }

  // tools
  if (state) {
    for (const [name, arm] of Object.entries(state.arms)) {
      const alert = isSafetyStop(arm.flags, arm.hold);
      const color = alert ? COLORS.alert : COLORS.arms[name] ?? COLORS.tip;
      const [fx, fy] = toPixels(arm.flange, pane, t);
      const [px, py] = toPixels(arm.tip, pane, t);
      ctx.beginPath();
      ctx.moveTo(fx, fy);
      ctx.lineTo(px, py);
      ctx.strokeStyle = color;
      ctx.lineWidth = Math.max(2, scene.toolDiameter * t.scale);
      ctx.lineCap = "round";
      ctx.stroke();
      // tip marker
      ctx.beginPath();
      ctx.arc(px, py, 3.5, 0, Math.PI * 2);
      ctx.fillStyle = alert ? COLORS.alert : COLORS.tip;
      ctx.fill();
      // fulcrum ring around the arm's own hole
      const hole = scene.armHoles[name];
      if (hole) {
        const [hx, hy] = toPixels(hole, pane, t);
        ctx.beginPath();
        ctx.arc(hx, hy, holeR + 2.5, 0, Math.PI * 2);
        ctx.strokeStyle = color;
        ctx.lineWidth = 1;
        ctx.stroke();
      }
    }
  }

  // pane label + axes
  const [h, v] = PANE_AXES[pane];
  ctx.fillStyle = COLORS.label;
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(`${pane}  (${h}→, ${v}↑)`, 8, 16);
}
