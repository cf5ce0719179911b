/** WebSocket session client. Works with the browser WebSocket or the `ws`
 * package in node — the constructor is injected so tests can pick one. */

import {
  AckMsg,
  EventMsg,
  Inbound,
  MessageFactory,
  MetricsMsg,
  Outbound,
  parseOutbound,
  PlanPreview,
  Snapshot,
  StateMsg,
} from "./protocol.js";

/** The subset of the WebSocket API the client touches. */
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsCtor = new (url: string) => WsLike;

interface Waiter {
  pred: (msg: Outbound) => boolean;
  resolve: (msg: Outbound) => void;
}

export interface ClientOptions {
  /** Server heartbeat period; silence for twice this long means "connecting". */
  heartbeatMs?: number;
  now?: () => number;
}

export class SessionClient {
  snapshot: Snapshot | null = null;
  state: StateMsg | null = null; // latest wins
  preview: PlanPreview | null = null; // latest wins
  factory: MessageFactory | null = null;
  closed = false;

  onState: ((msg: StateMsg) => void) | null = null;
  onMetrics: ((msg: MetricsMsg) => void) | null = null;
  onEvent: ((msg: EventMsg) => void) | null = null;
  onAck: ((msg: AckMsg) => void) | null = null;

  private ws: WsLike;
  private waiters: Waiter[] = [];
  private openPromise: Promise<Snapshot>;
  private lastRx: number;
  private readonly heartbeatMs: number;
  private readonly now: () => number;

  constructor(url: string, Ws: WsCtor, opts: ClientOptions = {}) {
    this.heartbeatMs = opts.heartbeatMs ?? 1000;
    this.now = opts.now ?? (() => Date.now());
    this.lastRx = this.now();
    this.ws = new Ws(url);
    this.openPromise = new Promise((resolve, reject) => {
      this.waiters.push({
        pred: (m) => m.type === "snapshot",
        resolve: (m) => resolve(m as Snapshot),
      });
      this.ws.onerror = () => reject(new Error(`websocket error connecting to ${url}`));
      this.ws.onclose = () => {
        this.closed = true;
        reject(new Error("websocket closed"));
      };
    });
    this.ws.onmessage = (ev) => this.handleFrame(String(ev.data));
  }

  /** Resolves once the server's snapshot arrives. */
  async opened(): Promise<Snapshot> {
    return this.openPromise;
  }

  /** True when nothing (not even a heartbeat) has arrived recently. */
  stale(): boolean {
    return this.closed || this.now() - this.lastRx > 2 * this.heartbeatMs;
  }

  send(msg: Inbound): void {
    this.ws.send(JSON.stringify(msg));
  }

  /** Next outbound message matching `pred`; rejects after `timeoutMs`. */
  waitFor(pred: (msg: Outbound) => boolean, timeoutMs = 10_000): Promise<Outbound> {
    return new Promise((resolve, reject) => {
      const waiter: Waiter = { pred, resolve };
      this.waiters.push(waiter);
      const timer = setTimeout(() => {
        const i = this.waiters.indexOf(waiter);
        if (i >= 0) {
          this.waiters.splice(i, 1);
          reject(new Error("timed out waiting for a matching message"));
        }
      }, timeoutMs);
      waiter.resolve = (msg) => {
        clearTimeout(timer);
        resolve(msg);
      };
    });
  }

  close(): void {
    this.closed = true;
    this.ws.close();
  }

  private handleFrame(text: string): void {
    const msg = parseOutbound(text);
    if (msg === null) return;
    this.lastRx = this.now();
    switch (msg.type) {
      case "snapshot":
        this.snapshot = msg;
        this.factory = new MessageFactory(msg.session);
        break;
      case "state":
        this.state = msg;
        this.onState?.(msg);
        break;
      case "plan_preview":
        this.preview = msg;
        break;
      case "metrics":
        this.onMetrics?.(msg);
        break;
      case "event":
        this.onEvent?.(msg);
        break;
      case "ack":
        this.onAck?.(msg);
        break;
      case "heartbeat":
        break;
    }
    for (let i = 0; i < this.waiters.length; i++) {
      if (this.waiters[i].pred(msg)) {
        const [w] = this.waiters.splice(i, 1);
        w.resolve(msg);
        i -= 1;
      }
    }
  }
}
