"""WebSocket session service exposing the live planner to operator consoles.

One session per connection at ``/session``. On accept the service sends a
snapshot (session id, DH table, collision spheres, horizon) so the console
can render geometry, then runs the closed loop at the configured period,
emitting one ``state``, one ``plan_preview``, and one ``metrics`` message per
cycle. Inbound commands: ``set_target`` (device pose, retargeted through the
clutch), ``set_params`` (hot-swapped at the next cycle boundary), ``clutch``,
and ``reset``. Malformed input produces an ``error`` event and the session
stays alive.

Message framing is JSON text, one message per frame, validated against the
schema published at ``data/schema/session_messages.schema.json``. Sequence
numbers increase per message type with no gaps; under backpressure the
``state`` / ``plan_preview`` streams coalesce to latest-wins while
``metrics`` / ``event`` / ``ack`` remain lossless and ordered.
"""

from __future__ import annotations

import asyncio
import json
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from importlib import resources

import jsonschema

from . import ocp
from .config import ArmConfig, ParamSet, load_arm, load_params
from .kinematics import ConfigurationError, Pose
from .reference import (Retargeter, SampleBuffer, TargetSample, quat_to_rot,
                        rot_to_quat)
from .runner import LOOP_RATE, PlantState, TeleopSession, run_cycle

_INBOUND_TYPES = ("set_target", "set_params", "clutch", "reset")
# streams that must never drop a message vs. slots where only the newest matters
_LATEST_WINS = ("state", "plan_preview")


def load_schema() -> dict:
    path = resources.files("steadyarm").joinpath("data").joinpath(
        "schema").joinpath("session_messages.schema.json")
    return json.loads(path.read_text(encoding="utf-8"))


_SCHEMA = load_schema()
_VALIDATORS = {
    t: jsonschema.Draft202012Validator(
        {"$defs": _SCHEMA["$defs"], "$ref": f"#/$defs/{t}"})
    for t in _INBOUND_TYPES
}


@dataclass(frozen=True)
class ServiceConfig:
    arm_name: str = "ur5e_like"
    default_params: str = "P2"
    max_sessions: int = 8
    period_s: float = 0.05      # wall-clock pacing of the loop
    heartbeat_s: float = 1.0
    idle_timeout_s: float = 30.0


class OutboundMux:
    """Per-session outbound buffer with per-type gap-free sequence numbers.

    Lossless kinds queue in order; latest-wins kinds overwrite a slot.
    Sequence numbers are assigned at drain time, so coalescing never creates
    gaps on the wire. ``put`` may be called from a worker thread once the mux
    is bound to the event loop.
    """

    def __init__(self, session_id: int):
        self.session_id = session_id
        self._fifo: list[tuple[str, dict]] = []
        self._slots: dict[str, dict] = {}
        self._seq: dict[str, int] = {}
        self._lock = threading.Lock()
        self._wakeup = asyncio.Event()
        self._loop: asyncio.AbstractEventLoop | None = None

    def bind_loop(self, loop: asyncio.AbstractEventLoop) -> None:
        self._loop = loop

    def put(self, kind: str, payload: dict) -> None:
        with self._lock:
            if kind in _LATEST_WINS:
                self._slots[kind] = payload
            else:
                self._fifo.append((kind, payload))
        if self._loop is not None:
            self._loop.call_soon_threadsafe(self._wakeup.set)
        else:
            self._wakeup.set()

    def stamp(self, kind: str, payload: dict) -> dict:
        self._seq[kind] = self._seq.get(kind, 0) + 1
        return {"v": 1, "type": kind, "session": self.session_id,
                "seq": self._seq[kind], **payload}

    def drain(self) -> list[dict]:
        with self._lock:
            pending = list(self._fifo)
            self._fifo.clear()
            for kind in _LATEST_WINS:
                payload = self._slots.pop(kind, None)
                if payload is not None:
                    pending.append((kind, payload))
            self._wakeup.clear()
        return [self.stamp(kind, payload) for kind, payload in pending]

    async def wait(self) -> None:
        await self._wakeup.wait()


def validate_inbound(msg) -> str | None:
    """Schema-check one inbound message; returns an error detail or None."""
    if not isinstance(msg, dict):
        return "message must be a JSON object"
    mtype = msg.get("type")
    if mtype not in _INBOUND_TYPES:
        return f"unknown message type {mtype!r}"
    errors = sorted(_VALIDATORS[mtype].iter_errors(msg), key=str)
    if errors:
        return f"{mtype}: {errors[0].message}"
    return None


def _pose_payload(pose: Pose) -> dict:
    return {"p": [float(v) for v in pose.p],
            "quat": [float(v) for v in rot_to_quat(pose.R)]}


class _Connection:
    """Everything one live session owns; no state is shared across sessions."""

    def __init__(self, session_id: int, arm: ArmConfig, params: ParamSet):
        self.id = session_id
        self.arm = arm
        self.tele = TeleopSession(arm, params)
        self.retarget = Retargeter()
        self.mux = OutboundMux(session_id)
        self.now = 0.0
        self.cycle = 0
        self.last_seq_in = 0
        self.last_stamp = -1.0
        self.last_device: tuple[np.ndarray, np.ndarray] | None = None
        self.pending_params: ParamSet | None = None
        self.pending_reset = False

    # -------------------------- inbound handling --------------------------

    def handle_text(self, raw: str) -> None:
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            self._error(f"malformed JSON: {exc}")
            return
        detail = validate_inbound(msg)
        if detail is not None:
            self._error(detail)
            return
        if msg["session"] != self.id:
            self._error(f"stale session id {msg['session']}; reopen a session")
            return
        if msg["seq"] <= self.last_seq_in:
            self._error(f"sequence {msg['seq']} not increasing "
                        f"(last was {self.last_seq_in})")
            return
        self.last_seq_in = msg["seq"]
        try:
            getattr(self, "_on_" + msg["type"])(msg)
        except (ValueError, ConfigurationError) as exc:
            self._error(str(exc))
            return
        self.mux.put("ack", {"of_seq": msg["seq"], "of_type": msg["type"],
                             "ok": True})

    def _error(self, detail: str) -> None:
        self.mux.put("event", {"level": "error",
                               "message": "rejected inbound message",
                               "detail": detail})

    def _ingest(self, pose: Pose) -> None:
        self.last_stamp = max(self.now, self.last_stamp + 1e-6)
        self.tele.ingest(TargetSample(self.last_stamp, pose))

    def _on_set_target(self, msg: dict) -> None:
        p = np.asarray(msg["p"], dtype=float)
        if not np.all(np.isfinite(p)):
            raise ValueError("target position must be finite")
        R = quat_to_rot(msg["quat"])
        self.last_device = (p, R)
        self._ingest(self.retarget.apply(p, R))

    def _on_set_params(self, msg: dict) -> None:
        self.pending_params = load_params(msg["name"])

    def _on_clutch(self, msg: dict) -> None:
        engaged = bool(msg["engaged"])
        if self.last_device is not None:
            self.retarget.set_clutch(engaged, *self.last_device)
            if engaged:
                # freeze the commanded target where it is
                self._ingest(self.retarget.apply(*self.last_device))
        else:
            self.retarget.set_clutch(engaged)

    def _on_reset(self, _msg: dict) -> None:
        # applied at the next cycle boundary so it cannot race a running solve
        self.pending_reset = True

    # --------------------------- cycle products ---------------------------

    def apply_pending(self) -> None:
        if self.pending_reset:
            self.pending_reset = False
            n = self.arm.dh.n_q
            home = np.concatenate([self.arm.q_home, np.zeros(n)])
            self.tele.plant = PlantState(x=home, t=self.now)
            self.tele.warm = None
            self.tele.plan = None
            self.tele.buffer = SampleBuffer()
            self.mux.put("event", {
                "level": "info",
                "message": f"plant re-homed at cycle {self.cycle + 1}"})
        if self.pending_params is not None:
            params = self.pending_params
            self.pending_params = None
            self.tele.params = params
            self.tele.prob = ocp.build(self.arm, params)
            self.mux.put("event", {
                "level": "info",
                "message": f"params switched to {params.name} "
                           f"at cycle {self.cycle + 1}"})

    def run_one_cycle(self) -> None:
        self.apply_pending()
        plan = run_cycle(self.tele, self.now)
        rec = self.tele.log.records[-1]
        self.cycle += 1
        n = self.arm.dh.n_q
        q = self.tele.plant.x[:n]
        kin = self.tele.prob.kin
        centers = kin.sphere_centers(q, self.arm.spheres)
        self.mux.put("state", {
            "cycle": self.cycle, "t": rec.t,
            "q": [float(v) for v in q],
            "qd": [float(v) for v in self.tele.plant.x[n:]],
            "ee": _pose_payload(kin.forward(q)),
            "target": _pose_payload(self._target_pose(rec)),
            "sphere_centers": [[float(v) for v in c] for c in centers],
        })
        self.mux.put("plan_preview", {
            "cycle": self.cycle,
            "poses": [_pose_payload(kin.forward(plan.X[k, :n]))
                      for k in range(1, len(plan.U) + 1)],
        })
        self.mux.put("metrics", {
            "cycle": self.cycle, "t": rec.t,
            "lateral": rec.lateral, "pos_err": rec.pos_err,
            "solve_ms": rec.solve_time * 1e3,
            "params": self.tele.params.name,
            "status": rec.status, "degraded": rec.degraded,
            "cold_start": rec.cold_start,
        })
        if rec.degraded:
            self.mux.put("event", {"level": "warning",
                                   "message": f"cycle {self.cycle} degraded: "
                                              "holding last plan"})
        self.now += 1.0 / LOOP_RATE

    def _target_pose(self, rec) -> Pose:
        samples = self.tele.buffer.snapshot()
        if samples:
            R = samples[-1].pose.R
        else:
            R = self.tele.prob.kin.forward(rec.x0[:self.arm.dh.n_q]).R
        return Pose(np.asarray(rec.target_p, float), R)

    def snapshot_payload(self, params_name: str) -> dict:
        dh = self.arm.dh
        return {
            "params": params_name, "rate": LOOP_RATE,
            "N": self.tele.params.N, "dt": self.tele.params.dt,
            "dh": {"a": list(map(float, dh.a)), "d": list(map(float, dh.d)),
                   "alpha": list(map(float, dh.alpha)),
                   "theta_offset": list(map(float, dh.theta_offset))},
            "spheres": [{"id": s.sphere_id, "link": s.link_index,
                         "center": [float(v) for v in s.local_center],
                         "radius": float(s.radius)} for s in self.arm.spheres],
            "q_home": [float(v) for v in self.arm.q_home],
            "reach": float(self.arm.reach),
        }


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="steadyarm session service")
    arm = load_arm(config.arm_name)
    default_params = load_params(config.default_params)
    active: set[int] = set()
    next_id = iter(range(1, 1 << 31))

    @app.websocket("/session")
    async def session_endpoint(ws: WebSocket):
        await ws.accept()
        if len(active) >= config.max_sessions:
            await ws.send_text(json.dumps({
                "v": 1, "type": "event", "session": 0, "seq": 1,
                "level": "error",
                "message": f"capacity exceeded ({config.max_sessions} sessions)"}))
            await ws.close()
            return
        session_id = next(next_id)
        active.add(session_id)
        conn = _Connection(session_id, arm, default_params)
        try:
            await ws.send_text(json.dumps(conn.mux.stamp(
                "snapshot", conn.snapshot_payload(default_params.name))))
            await _serve(ws, conn, config)
        finally:
            active.discard(session_id)

    return app


async def _serve(ws: WebSocket, conn: _Connection, config: ServiceConfig):
    loop = asyncio.get_running_loop()
    conn.mux.bind_loop(loop)

    async def cycle_task():
        while True:
            started = loop.time()
            await asyncio.to_thread(conn.run_one_cycle)
            delay = config.period_s - (loop.time() - started)
            await asyncio.sleep(max(0.0, delay))

    async def sender_task():
        while True:
            await conn.mux.wait()
            for msg in conn.mux.drain():
                await ws.send_text(json.dumps(msg))

    async def heartbeat_task():
        while True:
            await asyncio.sleep(config.heartbeat_s)
            conn.mux.put("heartbeat", {})

    tasks = [asyncio.create_task(t())
             for t in (cycle_task, sender_task, heartbeat_task)]
    try:
        while True:
            try:
                raw = await asyncio.wait_for(ws.receive_text(),
                                             timeout=config.idle_timeout_s)
            except asyncio.TimeoutError:
                break  # idle timeout: tear the session down
            conn.handle_text(raw)
    except WebSocketDisconnect:
        pass
    finally:
        for t in tasks:
            t.cancel()
        try:
            await ws.close()
        except Exception:
            pass


def main(argv=None) -> int:
    """Run the service with uvicorn (blocking)."""
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="steadyarm-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8720)
    parser.add_argument("--params", default="P2")
    args = parser.parse_args(argv)
    app = create_app(ServiceConfig(default_params=args.params))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    main()
