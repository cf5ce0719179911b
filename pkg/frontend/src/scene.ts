/** Canvas 2-D rendering of the arm: links, spheres, glass, and plan ghosts. */

import { orbitBasis, ViewBasis } from "./input.js";
import { fkFrames, matVec, quatToMat, sub, Vec3 } from "./math3.js";
import { PlanPreview, Snapshot, StateMsg } from "./protocol.js";

export class Camera {
  yaw = Math.PI / 4;
  pitch = Math.PI / 7;
  pxPerM = 420;
  lookAt: Vec3 = [0.3, 0.0, 0.35];

  basis(): ViewBasis {
    return orbitBasis(this.yaw, this.pitch);
  }

  /** Orthographic projection onto the view plane. */
  project(p: Vec3, w: number, h: number): [number, number] {
    const b = this.basis();
    const r = sub(p, this.lookAt);
    const x = r[0] * b.right[0] + r[1] * b.right[1] + r[2] * b.right[2];
    const y = r[0] * b.up[0] + r[1] * b.up[1] + r[2] * b.up[2];
    return [w / 2 + x * this.pxPerM, h / 2 - y * this.pxPerM];
  }
}

function line(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  w: number,
  h: number,
  a: Vec3,
  b: Vec3,
  style: string,
  width = 1,
): void {
  const [ax, ay] = cam.project(a, w, h);
  const [bx, by] = cam.project(b, w, h);
  ctx.strokeStyle = style;
  ctx.lineWidth = width;
  ctx.beginPath();
  ctx.moveTo(ax, ay);
  ctx.lineTo(bx, by);
  ctx.stroke();
}

function circle(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  w: number,
  h: number,
  c: Vec3,
  radiusM: number,
  stroke: string,
  fill?: string,
): void {
  const [cx, cy] = cam.project(c, w, h);
  ctx.beginPath();
  ctx.arc(cx, cy, Math.max(1.5, radiusM * cam.pxPerM), 0, 2 * Math.PI);
  if (fill) {
    ctx.fillStyle = fill;
    ctx.fill();
  }
  ctx.strokeStyle = stroke;
  ctx.stroke();
}

function drawBaseFrame(ctx: CanvasRenderingContext2D, cam: Camera, w: number, h: number): void {
  const o: Vec3 = [0, 0, 0];
  line(ctx, cam, w, h, o, [0.15, 0, 0], "#c04040", 2);
  line(ctx, cam, w, h, o, [0, 0.15, 0], "#40a040", 2);
  line(ctx, cam, w, h, o, [0, 0, 0.15], "#4060c0", 2);
}

/** A tilted-glass glyph: rim disc plus stem, oriented by the ee rotation. */
function drawGlass(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  w: number,
  h: number,
  p: Vec3,
  R: number[][],
  style: string,
): void {
  const up = matVec(R, [0, 0, 0.05]);
  const rim: Vec3[] = [];
  for (let k = 0; k < 12; k++) {
    const a = (2 * Math.PI * k) / 12;
    const local: Vec3 = [0.03 * Math.cos(a), 0.03 * Math.sin(a), 0.05];
    rim.push([
      p[0] + matVec(R, local)[0],
      p[1] + matVec(R, local)[1],
      p[2] + matVec(R, local)[2],
    ]);
  }
  for (let k = 0; k < rim.length; k++) {
    line(ctx, cam, w, h, rim[k], rim[(k + 1) % rim.length], style, 1.5);
  }
  line(ctx, cam, w, h, p, [p[0] + up[0], p[1] + up[1], p[2] + up[2]], style, 1.5);
}

export interface SceneInput {
  snapshot: Snapshot | null;
  state: StateMsg | null;
  preview: PlanPreview | null;
  connected: boolean;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  w: number,
  h: number,
  s: SceneInput,
): void {
  ctx.fillStyle = "#0b0f14";
  ctx.fillRect(0, 0, w, h);

  if (!s.connected || s.snapshot === null || s.state === null) {
    ctx.fillStyle = "#9fb2c5";
    ctx.font = "16px ui-monospace, monospace";
    ctx.textAlign = "center";
    ctx.fillText("connecting…", w / 2, h / 2);
    ctx.textAlign = "left";
    return;
  }

  drawBaseFrame(ctx, cam, w, h);

  // Plan-preview ghost trail (future end-effector poses).
  if (s.preview !== null) {
    let prev: Vec3 | null = null;
    for (const pose of s.preview.poses) {
      circle(ctx, cam, w, h, pose.p, 0.006, "#3a6a8a");
      if (prev !== null) line(ctx, cam, w, h, prev, pose.p, "#2a4a60", 1);
      prev = pose.p;
    }
  }

  // Links: segments between consecutive link-frame origins.
  const frames = fkFrames(s.snapshot.dh, s.state.q);
  for (let i = 1; i < frames.length; i++) {
    line(ctx, cam, w, h, frames[i - 1].p, frames[i].p, "#c8d4e0", 3);
    circle(ctx, cam, w, h, frames[i].p, 0.008, "#e8f0f8", "#2a3542");
  }

  // Collision spheres at the server-reported centres.
  for (let i = 0; i < s.state.sphere_centers.length; i++) {
    const radius = s.snapshot.spheres[i]?.radius ?? 0.03;
    circle(ctx, cam, w, h, s.state.sphere_centers[i], radius, "rgba(90,140,190,0.35)");
  }

  // Target marker and the carried glass at the end effector.
  circle(ctx, cam, w, h, s.state.target.p, 0.012, "#ffb84d");
  drawGlass(ctx, cam, w, h, s.state.ee.p, quatToMat(s.state.ee.quat), "#7fd4a8");
}
