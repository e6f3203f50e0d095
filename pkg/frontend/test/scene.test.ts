import { describe, expect, it } from "vitest";

import type { Vec3, WelcomeConfig } from "../src/protocol.js";
import {
  PANES,
  paneTransform,
  pointSegmentDistance,
  project,
  sceneFromConfig,
  toPixels,
  viewBounds,
} from "../src/scene.js";

const CONFIG: WelcomeConfig = {
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

describe("sceneFromConfig", () => {
  it("resolves each arm's hole index to its position", () => {
    const scene = sceneFromConfig(CONFIG);
    expect(scene.armHoles.left).toEqual([-0.05, 0.4, 0.15]);
    expect(scene.armHoles.right).toEqual([0.05, 0.4, 0.15]);
    expect(scene.toolLength).toBe(0.3);
  });
});

describe("project", () => {
  const p: Vec3 = [1, 2, 3];
  it("keeps (x,y) in the top view", () => expect(project(p, "top")).toEqual([1, 2]));
  it("keeps (x,z) in the front view", () => expect(project(p, "front")).toEqual([1, 3]));
  it("keeps (y,z) in the side view", () => expect(project(p, "side")).toEqual([2, 3]));
});

describe("paneTransform / toPixels", () => {
  const scene = sceneFromConfig(CONFIG);
  const bounds = viewBounds(scene);

  it("keeps the whole view volume inside the canvas in every pane", () => {
    for (const pane of PANES) {
      const t = paneTransform(bounds, pane, 420, 360, 16);
      const corners: Vec3[] = [
        bounds.min,
        bounds.max,
        [bounds.min[0], bounds.max[1], bounds.min[2]],
        [bounds.max[0], bounds.min[1], bounds.max[2]],
      ];
      for (const c of corners) {
        const [x, y] = toPixels(c, pane, t);
        expect(x).toBeGreaterThanOrEqual(0);
        expect(x).toBeLessThanOrEqual(420);
        expect(y).toBeGreaterThanOrEqual(0);
        expect(y).toBeLessThanOrEqual(360);
      }
    }
  });

  it("uses the same scale on both axes (no distortion)", () => {
    const t = paneTransform(bounds, "front", 420, 360, 16);
    const a = toPixels([0, 0, 0], "front", t);
    const bx = toPixels([0.1, 0, 0], "front", t);
    const bz = toPixels([0, 0, 0.1], "front", t);
    const dxPerMeterX = Math.abs(bx[0] - a[0]) / 0.1;
    const dyPerMeterZ = Math.abs(bz[1] - a[1]) / 0.1;
    expect(dxPerMeterX).toBeCloseTo(t.scale, 9);
    expect(dyPerMeterZ).toBeCloseTo(t.scale, 9);
  });

  it("draws +z upward (smaller pixel y) in front and side views", () => {
    for (const pane of ["front", "side"] as const) {
      const t = paneTransform(bounds, pane, 420, 360, 16);
      const low = toPixels([0, 0.4, 0.0], pane, t);
      const high = toPixels([0, 0.4, 0.2], pane, t);
      expect(high[1]).toBeLessThan(low[1]);
    }
  });

  it("projects a tool axis through its hole onto a segment through the projected hole in every pane", () => {
    const scene2 = sceneFromConfig(CONFIG);
    const bounds2 = viewBounds(scene2);
    const hole = scene2.armHoles.left;
    // synthetic flange above the hole and tip below it, exactly collinear
    const dir: Vec3 = [0.3, -0.5, 0.81];
    const norm = Math.hypot(...dir);
    const u = dir.map((c) => c / norm) as Vec3;
    const flange = hole.map((c, i) => c + 0.22 * u[i]) as Vec3;
    const tip = hole.map((c, i) => c - 0.08 * u[i]) as Vec3;
    for (const pane of PANES) {
      const t = paneTransform(bounds2, pane, 420, 360, 16);
      const d = pointSegmentDistance(
        toPixels(hole, pane, t),
        toPixels(flange, pane, t),
        toPixels(tip, pane, t),
      );
      expect(d).toBeLessThan(1e-9);
    }
  });
});

describe("pointSegmentDistance", () => {
  it("measures perpendicular distance inside the segment", () => {
    expect(pointSegmentDistance([0, 1], [-1, 0], [1, 0])).toBeCloseTo(1, 12);
  });
  it("clamps to the nearest endpoint outside the segment", () => {
    expect(pointSegmentDistance([3, 4], [0, 0], [0, 0])).toBeCloseTo(5, 12);
    expect(pointSegmentDistance([2, 0], [-1, 0], [1, 0])).toBeCloseTo(1, 12);
  });
});
