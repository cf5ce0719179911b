/** Rolling metrics: a bounded ring of samples plus canvas strip charts. */

import { MetricsMsg } from "./protocol.js";

export const RING_CAPACITY = 600; // 30 s of history at the 20 Hz loop rate
export const SPILL_THRESHOLD = 0.94; // m/s^2 lateral accel that risks a spill

export class MetricsRing {
  private buf: MetricsMsg[] = [];

  constructor(readonly capacity = RING_CAPACITY) {}

  push(m: MetricsMsg): void {
    this.buf.push(m);
    if (this.buf.length > this.capacity) {
      this.buf.splice(0, this.buf.length - this.capacity);
    }
  }

  get length(): number {
    return this.buf.length;
  }

  latest(): MetricsMsg | null {
    return this.buf.length ? this.buf[this.buf.length - 1] : null;
  }

  values(key: "lateral" | "pos_err" | "solve_ms"): number[] {
    return this.buf.map((m) => m[key]);
  }

  /** Mean of the newest `n` samples of `key`; NaN when empty. */
  recentMean(key: "lateral" | "pos_err" | "solve_ms", n: number): number {
    if (!this.buf.length) return NaN;
    const tail = this.buf.slice(-n);
    return tail.reduce((s, m) => s + m[key], 0) / tail.length;
  }
}

function fmt(x: number | undefined, digits: number): string {
  return x === undefined || Number.isNaN(x) ? "—" : x.toFixed(digits);
}

/** One strip chart drawn into a 2-D canvas context. */
export function drawStrip(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  w: number,
  h: number,
  values: number[],
  label: string,
  unit: string,
  highlightAbove?: number,
): void {
  ctx.save();
  ctx.fillStyle = "#10151c";
  ctx.fillRect(x, y, w, h);
  ctx.strokeStyle = "#2a3542";
  ctx.strokeRect(x + 0.5, y + 0.5, w - 1, h - 1);

  const latest = values.length ? values[values.length - 1] : undefined;
  let peak = 1e-9;
  for (const v of values) peak = Math.max(peak, v);
  if (highlightAbove !== undefined) peak = Math.max(peak, highlightAbove * 1.1);

  if (highlightAbove !== undefined) {
    const ty = y + h - (highlightAbove / peak) * (h - 18) - 4;
    ctx.strokeStyle = "#7a3030";
    ctx.setLineDash([3, 3]);
    ctx.beginPath();
    ctx.moveTo(x + 2, ty);
    ctx.lineTo(x + w - 2, ty);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  if (values.length > 1) {
    const hot = highlightAbove !== undefined && latest !== undefined && latest > highlightAbove;
    ctx.strokeStyle = hot ? "#ff5544" : "#57b2ff";
    ctx.beginPath();
    for (let i = 0; i < values.length; i++) {
      const px = x + 2 + (i / (values.length - 1)) * (w - 4);
      const py = y + h - (values[i] / peak) * (h - 18) - 4;
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    }
    ctx.stroke();
  }

  ctx.fillStyle = "#9fb2c5";
  ctx.font = "11px ui-monospace, monospace";
  ctx.fillText(`${label} ${fmt(latest, 3)} ${unit}`, x + 6, y + 12);
  ctx.restore();
}

export interface GaugeReadout {
  lateral: string;
  posErr: string;
  solveMs: string;
  params: string;
  spillRisk: boolean;
}

/** Text-panel values; em-dashes until the first metrics frame arrives. */
export function readout(ring: MetricsRing, spillThreshold = SPILL_THRESHOLD): GaugeReadout {
  const m = ring.latest();
  if (m === null) {
    return { lateral: "—", posErr: "—", solveMs: "—", params: "—", spillRisk: false };
  }
  return {
    lateral: `${m.lateral.toFixed(3)} m/s²`,
    posErr: `${(m.pos_err * 1000).toFixed(1)} mm`,
    solveMs: `${m.solve_ms.toFixed(1)} ms`,
    params: m.params,
    spillRisk: m.lateral > spillThreshold,
  };
}
