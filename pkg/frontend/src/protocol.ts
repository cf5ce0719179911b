/** Wire types and builders for the session protocol (JSON text frames, v:1). */

import { Quat, Vec3 } from "./math3.js";

export const PROTOCOL_VERSION = 1;

export interface Pose {
  p: Vec3;
  quat: Quat;
}

export interface Snapshot {
  v: 1;
  type: "snapshot";
  session: number;
  seq: number;
  params: string;
  rate: number;
  N: number;
  dt: number;
  dh: { a: number[]; d: number[]; alpha: number[]; theta_offset: number[] };
  spheres: { id: string; link: number; center: Vec3; radius: number }[];
  q_home: number[];
  reach: number;
}

export interface StateMsg {
  v: 1;
  type: "state";
  session: number;
  seq: number;
  cycle: number;
  t: number;
  q: number[];
  qd: number[];
  ee: Pose;
  target: Pose;
  sphere_centers: Vec3[];
}

export interface PlanPreview {
  v: 1;
  type: "plan_preview";
  session: number;
  seq: number;
  cycle: number;
  poses: Pose[];
}

export interface MetricsMsg {
  v: 1;
  type: "metrics";
  session: number;
  seq: number;
  cycle: number;
  t: number;
  lateral: number;
  pos_err: number;
  solve_ms: number;
  params: string;
  status: string;
  degraded: boolean;
  cold_start: boolean;
}

export interface EventMsg {
  v: 1;
  type: "event";
  session: number;
  seq: number;
  level: "info" | "warning" | "error";
  message: string;
  detail?: string;
}

export interface AckMsg {
  v: 1;
  type: "ack";
  session: number;
  seq: number;
  of_seq: number;
  of_type: string;
  ok: boolean;
}

export interface HeartbeatMsg {
  v: 1;
  type: "heartbeat";
  session: number;
  seq: number;
}

export type Outbound =
  | Snapshot
  | StateMsg
  | PlanPreview
  | MetricsMsg
  | EventMsg
  | AckMsg
  | HeartbeatMsg;

export interface SetTarget {
  v: 1;
  type: "set_target";
  session: number;
  seq: number;
  p: Vec3;
  quat: Quat;
}

export interface SetParams {
  v: 1;
  type: "set_params";
  session: number;
  seq: number;
  name: string;
}

export interface ClutchMsg {
  v: 1;
  type: "clutch";
  session: number;
  seq: number;
  engaged: boolean;
}

export interface ResetMsg {
  v: 1;
  type: "reset";
  session: number;
  seq: number;
}

export type Inbound = SetTarget | SetParams | ClutchMsg | ResetMsg;

/** Allocates the session id and a gap-free outgoing sequence. */
export class MessageFactory {
  private seq = 0;

  constructor(readonly session: number) {}

  private next(): number {
    this.seq += 1;
    return this.seq;
  }

  setTarget(p: Vec3, quat: Quat): SetTarget {
    return {
      v: PROTOCOL_VERSION,
      type: "set_target",
      session: this.session,
      seq: this.next(),
      p: [p[0], p[1], p[2]],
      quat: [quat[0], quat[1], quat[2], quat[3]],
    };
  }

  setParams(name: string): SetParams {
    return {
      v: PROTOCOL_VERSION,
      type: "set_params",
      session: this.session,
      seq: this.next(),
      name,
    };
  }

  clutch(engaged: boolean): ClutchMsg {
    return {
      v: PROTOCOL_VERSION,
      type: "clutch",
      session: this.session,
      seq: this.next(),
      engaged,
    };
  }

  reset(): ResetMsg {
    return { v: PROTOCOL_VERSION, type: "reset", session: this.session, seq: this.next() };
  }
}

export function parseOutbound(text: string): Outbound | null {
  let msg: unknown;
  try {
    msg = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as { v?: unknown; type?: unknown };
  if (m.v !== PROTOCOL_VERSION || typeof m.type !== "string") return null;
  return msg as Outbound;
}
