/** Unit tests: message building against the published schema, pointer
 * mapping contracts, throttling, and the metrics ring. No live server. */

import Ajv2020 from "ajv/dist/2020.js";
import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { RING_CAPACITY, MetricsRing } from "../src/gauges.js";
import { defaultBasis, InputMapper, orbitBasis } from "../src/input.js";
import { clipToReach, matIdentity, norm, Vec3 } from "../src/math3.js";
import { MessageFactory, MetricsMsg } from "../src/protocol.js";

const schema = JSON.parse(
  readFileSync(
    new URL("../../src/steadyarm/data/schema/session_messages.schema.json", import.meta.url),
    "utf8",
  ),
);

const ajv = new Ajv2020({ allowUnionTypes: true });
ajv.addSchema(schema);
const validateInbound = ajv.compile({ $ref: `${schema.$id}#/$defs/inbound` });

describe("outbound messages validate against the published schema", () => {
  it("accepts every message the console can build", () => {
    const f = new MessageFactory(3);
    const msgs = [
      f.setTarget([0.4, -0.1, 0.5], [1, 0, 0, 0]),
      f.setParams("P1"),
      f.clutch(true),
      f.clutch(false),
      f.reset(),
    ];
    for (const m of msgs) {
      const ok = validateInbound(JSON.parse(JSON.stringify(m)));
      expect(ok, JSON.stringify(ajv.errorsText(validateInbound.errors))).toBe(true);
    }
  });

  it("assigns strictly increasing, gap-free sequence numbers", () => {
    const f = new MessageFactory(1);
    const seqs = [f.reset().seq, f.clutch(true).seq, f.setParams("P2").seq, f.reset().seq];
    expect(seqs).toEqual([1, 2, 3, 4]);
  });

  it("rejects a malformed message (sanity check on the validator)", () => {
    expect(validateInbound({ v: 1, type: "set_target", session: 1, seq: 1, p: [0, 0] })).toBe(
      false,
    );
    expect(validateInbound({ v: 2, type: "reset", session: 1, seq: 1 })).toBe(false);
  });
});

describe("pointer mapping", () => {
  it("moves 0.2 m in the view plane for a 100 px drag", () => {
    const start: Vec3 = [0.5, 0.0, 0.4];
    const m = new InputMapper(start, matIdentity(), defaultBasis());
    m.drag(100, 0, false);
    const moved = m.pose().p;
    const d: Vec3 = [moved[0] - start[0], moved[1] - start[1], moved[2] - start[2]];
    expect(norm(d)).toBeCloseTo(0.2, 9);
  });

  it("maps vertical drag to the camera's up axis", () => {
    const m = new InputMapper([0, 0, 0], matIdentity(), orbitBasis(0, 0));
    m.drag(0, -50, false); // drag up the screen
    expect(m.pose().p[2]).toBeCloseTo(0.1, 9);
  });

  it("scroll moves along the view axis", () => {
    const basis = orbitBasis(0, 0); // forward = [-1, 0, 0]
    const m = new InputMapper([0, 0, 0], matIdentity(), basis);
    m.scroll(-200);
    expect(m.pose().p[0]).toBeCloseTo(-0.1, 9);
    expect(m.pose().p[1]).toBeCloseTo(0, 9);
  });

  it("shift-drag changes orientation, not position", () => {
    const m = new InputMapper([0.2, 0.1, 0.3], matIdentity(), defaultBasis());
    m.drag(40, -25, true);
    expect(m.pose().p).toEqual([0.2, 0.1, 0.3]);
    const q = m.pose().quat;
    expect(Math.abs(q[0])).toBeLessThan(1 - 1e-6); // rotated away from identity
    expect(Math.hypot(q[0], q[1], q[2], q[3])).toBeCloseTo(1, 12);
  });

  it("emits nothing while the clutch is engaged", () => {
    const m = new InputMapper([0, 0, 0], matIdentity(), defaultBasis());
    m.setClutch(true);
    let t = 0;
    for (let i = 0; i < 120; i++) {
      m.drag(5, 3, false);
      expect(m.poll(t)).toBeNull();
      t += 16.7;
    }
    // Release: the pose kept following the pointer and is re-announced once.
    m.setClutch(false);
    const sample = m.poll(t);
    expect(sample).not.toBeNull();
    expect(norm(sample!.p)).toBeGreaterThan(0);
  });

  it("coalesces 60 Hz input to at most the 20 Hz wire rate", () => {
    const m = new InputMapper([0, 0, 0], matIdentity(), defaultBasis());
    let sent = 0;
    let t = 0;
    for (let i = 0; i < 60; i++) {
      m.drag(1, 0, false);
      if (m.poll(t) !== null) sent += 1;
      t = (i + 1) * 17; // 17 ms frames: just under 60 Hz, integer clock
    }
    expect(sent).toBe(20); // every third frame clears the 50 ms wire period
    // The movement still pending when the hand stops is flushed exactly once;
    // after that, quiet hands send nothing at all.
    expect(m.poll(t + 1000)).not.toBeNull();
    expect(m.poll(t + 2000)).toBeNull();
  });
});

describe("reach clamp mirror", () => {
  it("projects out-of-reach points radially onto the sphere", () => {
    const p: Vec3 = [1.2, -0.9, 0.6];
    const clamped = clipToReach(p, 0.9);
    expect(norm(clamped)).toBeCloseTo(0.9, 12);
    const k = clamped[0] / p[0];
    expect(clamped[1] / p[1]).toBeCloseTo(k, 12);
    expect(clamped[2] / p[2]).toBeCloseTo(k, 12);
  });

  it("leaves reachable points untouched", () => {
    const p: Vec3 = [0.3, 0.2, 0.1];
    expect(clipToReach(p, 0.9)).toEqual(p);
  });
});

describe("metrics ring", () => {
  const sample = (cycle: number, lateral: number): MetricsMsg => ({
    v: 1,
    type: "metrics",
    session: 1,
    seq: cycle,
    cycle,
    t: cycle * 0.05,
    lateral,
    pos_err: 0.01,
    solve_ms: 12,
    params: "P2",
    status: "converged",
    degraded: false,
    cold_start: false,
  });

  it("never holds more than its capacity", () => {
    const ring = new MetricsRing();
    for (let i = 0; i < RING_CAPACITY + 250; i++) ring.push(sample(i, 0.1));
    expect(ring.length).toBe(RING_CAPACITY);
    expect(ring.latest()!.cycle).toBe(RING_CAPACITY + 249);
    expect(ring.values("lateral")).toHaveLength(RING_CAPACITY);
  });

  it("reports em-dash placeholders before the first sample", async () => {
    const { readout } = await import("../src/gauges.js");
    const r = readout(new MetricsRing());
    expect(r.lateral).toBe("—");
    expect(r.params).toBe("—");
    expect(r.spillRisk).toBe(false);
  });

  it("flags spill risk above the threshold", async () => {
    const { readout } = await import("../src/gauges.js");
    const ring = new MetricsRing();
    ring.push(sample(1, 1.2));
    expect(readout(ring, 0.94).spillRisk).toBe(true);
    ring.push(sample(2, 0.5));
    expect(readout(ring, 0.94).spillRisk).toBe(false);
  });
});
