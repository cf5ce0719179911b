/** Maps pointer gestures onto a virtual device pose and throttles the wire.
 *
 * Contract: an unmodified drag of 100 px moves the target 0.2 m in the view
 * plane (0.002 m/px). Input may arrive at up to 60 Hz; `poll` releases at most
 * one target per wire period (50 ms, the planner's loop rate). While the
 * clutch is engaged nothing reaches the wire, but the local pose keeps
 * following the pointer so the operator can re-centre their hand.
 */

import { Mat3, matMul, matToQuat, Quat, rotationAbout, scale, Vec3 } from "./math3.js";

export interface ViewBasis {
  right: Vec3;
  up: Vec3;
  forward: Vec3;
}

export interface InputOptions {
  dragScale?: number; // metres per pixel
  rotScale?: number; // radians per pixel (Shift-drag)
  scrollScale?: number; // metres per wheel unit
  wirePeriodMs?: number;
}

export interface TargetSample {
  p: Vec3;
  quat: Quat;
}

export class InputMapper {
  p: Vec3;
  R: Mat3;
  clutched = false;

  readonly dragScale: number;
  readonly rotScale: number;
  readonly scrollScale: number;
  readonly wirePeriodMs: number;

  private basis: ViewBasis;
  private dirty = false;
  private lastSentMs = -Infinity;

  constructor(start: Vec3, startR: Mat3, basis: ViewBasis, opts: InputOptions = {}) {
    this.p = [start[0], start[1], start[2]];
    this.R = startR.map((row) => row.slice());
    this.basis = basis;
    this.dragScale = opts.dragScale ?? 0.002;
    this.rotScale = opts.rotScale ?? 0.008;
    this.scrollScale = opts.scrollScale ?? 0.0005;
    this.wirePeriodMs = opts.wirePeriodMs ?? 50;
  }

  setBasis(basis: ViewBasis): void {
    this.basis = basis;
  }

  /** Pointer moved dx,dy pixels. Shift steers orientation instead. */
  drag(dx: number, dy: number, shift: boolean): void {
    if (shift) {
      const pitch = rotationAbout(this.basis.right, -dy * this.rotScale);
      const roll = rotationAbout(this.basis.forward, -dx * this.rotScale);
      this.R = matMul(matMul(roll, pitch), this.R);
    } else {
      const step = scale(this.basis.right, dx * this.dragScale);
      const lift = scale(this.basis.up, -dy * this.dragScale);
      this.p = [
        this.p[0] + step[0] + lift[0],
        this.p[1] + step[1] + lift[1],
        this.p[2] + step[2] + lift[2],
      ];
    }
    this.dirty = true;
  }

  /** Wheel: move along the view axis (depth). */
  scroll(deltaY: number): void {
    const push = scale(this.basis.forward, -deltaY * this.scrollScale);
    this.p = [this.p[0] + push[0], this.p[1] + push[1], this.p[2] + push[2]];
    this.dirty = true;
  }

  setClutch(engaged: boolean): void {
    this.clutched = engaged;
    if (!engaged) this.dirty = true; // re-announce pose after release
  }

  pose(): TargetSample {
    return { p: [this.p[0], this.p[1], this.p[2]], quat: matToQuat(this.R) };
  }

  /**
   * The target to put on the wire now, or null when throttled, clutched, or
   * unchanged since the last send.
   */
  poll(nowMs: number): TargetSample | null {
    if (this.clutched || !this.dirty) return null;
    if (nowMs - this.lastSentMs < this.wirePeriodMs) return null;
    this.lastSentMs = nowMs;
    this.dirty = false;
    return this.pose();
  }
}

/** Basis for an orbit camera at (yaw, pitch) looking at the origin, z up.
 * `forward` points from the camera into the scene. */
export function orbitBasis(yaw: number, pitch: number): ViewBasis {
  const cy = Math.cos(yaw);
  const sy = Math.sin(yaw);
  const cp = Math.cos(pitch);
  const sp = Math.sin(pitch);
  const forward: Vec3 = [-cp * cy, -cp * sy, -sp];
  const right: Vec3 = [-sy, cy, 0];
  const up: Vec3 = [
    right[1] * forward[2] - right[2] * forward[1],
    right[2] * forward[0] - right[0] * forward[2],
    right[0] * forward[1] - right[1] * forward[0],
  ];
  return { right, up, forward };
}

/** The fixed default viewpoint: slightly above the table, 45 deg around. */
export function defaultBasis(): ViewBasis {
  return orbitBasis(Math.PI / 4, Math.PI / 7);
}
