/** Operator console entry point: wires the session client, the pointer
 * mapper, and the canvas renderers together. Runs only in the browser. */

import { drawStrip, MetricsRing, readout, SPILL_THRESHOLD } from "./gauges.js";
import { InputMapper } from "./input.js";
import { fkFrames, matIdentity } from "./math3.js";
import { SessionClient, WsCtor } from "./net.js";
import { Camera, drawScene } from "./scene.js";

interface Settings {
  host: string;
  port: number;
  dragScale: number;
  spillThreshold: number;
}

function settingsFromQuery(): Settings {
  const q = new URLSearchParams(window.location.search);
  return {
    host: q.get("host") ?? "127.0.0.1",
    port: Number(q.get("port") ?? 8720),
    dragScale: Number(q.get("drag") ?? 0.002),
    spillThreshold: Number(q.get("spill") ?? SPILL_THRESHOLD),
  };
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const settings = settingsFromQuery();
  el<HTMLInputElement>("opt-host").value = settings.host;
  el<HTMLInputElement>("opt-port").value = String(settings.port);
  el<HTMLInputElement>("opt-drag").value = String(settings.dragScale);
  el<HTMLInputElement>("opt-spill").value = String(settings.spillThreshold);
  el<HTMLButtonElement>("opt-apply").addEventListener("click", () => {
    const q = new URLSearchParams({
      host: el<HTMLInputElement>("opt-host").value,
      port: el<HTMLInputElement>("opt-port").value,
      drag: el<HTMLInputElement>("opt-drag").value,
      spill: el<HTMLInputElement>("opt-spill").value,
    });
    window.location.search = q.toString(); // reload with the new session
  });

  const sceneCanvas = el<HTMLCanvasElement>("scene");
  const stripCanvas = el<HTMLCanvasElement>("strips");
  const sceneCtx = sceneCanvas.getContext("2d")!;
  const stripCtx = stripCanvas.getContext("2d")!;
  const cam = new Camera();
  const ring = new MetricsRing();
  const eventsBox = el<HTMLUListElement>("events");

  const url = `ws://${settings.host}:${settings.port}/session`;
  const client = new SessionClient(url, WebSocket as unknown as WsCtor);
  let mapper: InputMapper | null = null;

  client.onEvent = (ev) => {
    const li = document.createElement("li");
    li.className = ev.level;
    li.textContent = `[${ev.level}] ${ev.message}${ev.detail ? ` — ${ev.detail}` : ""}`;
    eventsBox.prepend(li);
    while (eventsBox.children.length > 8) eventsBox.removeChild(eventsBox.lastChild!);
  };
  client.onMetrics = (m) => ring.push(m);

  client
    .opened()
    .then((snap) => {
      const homeEe = fkFrames(snap.dh, snap.q_home);
      mapper = new InputMapper(homeEe[homeEe.length - 1].p, matIdentity(), cam.basis(), {
        dragScale: settings.dragScale,
      });
      el<HTMLSpanElement>("status").textContent = `session ${snap.session} · ${snap.params}`;
    })
    .catch((err) => {
      el<HTMLSpanElement>("status").textContent = String(err);
    });

  // Pointer gestures: left drag steers the target (Shift for orientation),
  // right drag orbits the camera, wheel is depth.
  let dragging: "target" | "camera" | null = null;
  let lastX = 0;
  let lastY = 0;
  sceneCanvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
  sceneCanvas.addEventListener("pointerdown", (ev) => {
    dragging = ev.button === 2 ? "camera" : "target";
    lastX = ev.clientX;
    lastY = ev.clientY;
    sceneCanvas.setPointerCapture(ev.pointerId);
  });
  sceneCanvas.addEventListener("pointerup", () => {
    dragging = null;
  });
  sceneCanvas.addEventListener("pointermove", (ev) => {
    if (dragging === null) return;
    const dx = ev.clientX - lastX;
    const dy = ev.clientY - lastY;
    lastX = ev.clientX;
    lastY = ev.clientY;
    if (dragging === "camera") {
      cam.yaw -= dx * 0.01;
      cam.pitch = Math.min(1.4, Math.max(-0.2, cam.pitch + dy * 0.01));
      mapper?.setBasis(cam.basis());
    } else {
      mapper?.drag(dx, dy, ev.shiftKey);
    }
  });
  sceneCanvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    mapper?.scroll(ev.deltaY);
  });

  const clutchBtn = el<HTMLButtonElement>("clutch");
  clutchBtn.addEventListener("click", () => {
    if (mapper === null || client.factory === null) return;
    const engaged = !mapper.clutched;
    mapper.setClutch(engaged);
    client.send(client.factory.clutch(engaged));
    clutchBtn.classList.toggle("active", engaged);
    clutchBtn.textContent = engaged ? "clutch: held" : "clutch";
  });

  const paramsBtn = el<HTMLButtonElement>("params");
  paramsBtn.addEventListener("click", () => {
    if (client.factory === null) return;
    const current = ring.latest()?.params ?? client.snapshot?.params ?? "P2";
    client.send(client.factory.setParams(current === "P2" ? "P1" : "P2"));
  });

  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    if (client.factory === null) return;
    client.send(client.factory.reset());
  });

  function frame(): void {
    const w = sceneCanvas.width;
    const h = sceneCanvas.height;
    if (mapper !== null && client.factory !== null && client.snapshot !== null) {
      const sample = mapper.poll(performance.now());
      if (sample !== null) {
        client.send(client.factory.setTarget(sample.p, sample.quat));
      }
    }
    drawScene(sceneCtx, cam, w, h, {
      snapshot: client.snapshot,
      state: client.state,
      preview: client.preview,
      connected: !client.stale(),
    });

    stripCtx.fillStyle = "#0b0f14";
    stripCtx.fillRect(0, 0, stripCanvas.width, stripCanvas.height);
    drawStrip(stripCtx, 0, 0, stripCanvas.width, 56, ring.values("lateral"), "lateral", "m/s²", settings.spillThreshold);
    drawStrip(stripCtx, 0, 62, stripCanvas.width, 56, ring.values("pos_err"), "tracking err", "m");
    drawStrip(stripCtx, 0, 124, stripCanvas.width, 56, ring.values("solve_ms"), "solve", "ms");

    const r = readout(ring, settings.spillThreshold);
    el<HTMLSpanElement>("g-lateral").textContent = r.lateral;
    el<HTMLSpanElement>("g-err").textContent = r.posErr;
    el<HTMLSpanElement>("g-solve").textContent = r.solveMs;
    const badge = el<HTMLSpanElement>("g-params");
    badge.textContent = r.params;
    badge.className = r.params === "P1" ? "badge p1" : "badge p2";
    el<HTMLSpanElement>("g-spill").textContent = r.spillRisk ? "SPILL RISK" : "";

    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

main();
