"""Closed-loop receding-horizon teleoperation runner.

Each 50 ms cycle: estimate the target twist from recent samples, extrapolate
the reference over the horizon, shift the previous solution as a warm start,
solve the horizon problem, and hand the plan to the simulated plant. The
plant is ideal-tracking (it follows the planned state trajectory exactly,
interpolating linearly between nodes); an optional first-order tracking lag
can be enabled but defaults off. If a solve fails or returns an infeasible
plan, the previous plan keeps executing (hold-last-plan) so a command is
defined at every instant.

Log CSV column order (one row per cycle):
  t, q0..q{n-1}, qd0..qd{n-1}            cycle start state x0
  tgt_x, tgt_y, tgt_z, tgt_roll          clipped operator target at the cycle
  ee_x, ee_y, ee_z, ee_roll              executed end-effector pose (cycle end)
  alocal_x, alocal_y, alocal_z, lateral  liquid-frame acceleration and its xy norm
  pos_err                                ||ee - target|| at cycle end
  objective, iterations, kkt, violation, solve_ms, status
  cold_start, overrun, degraded          0/1 flags
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ocp
from .config import ArmConfig, ParamSet
from .kinematics import Pose
from .reference import (ReferenceTrajectory, SampleBuffer, TargetSample,
                        clip_to_reach, predict_from_samples)

LOOP_RATE = 20.0


@dataclass
class PlantState:
    """Simulated arm state; advanced only by plant_step."""

    x: np.ndarray   # (2 n_q,)
    t: float        # simulation clock [s]


@dataclass
class CycleRecord:
    t: float
    x0: np.ndarray
    target_p: np.ndarray
    target_roll: float
    ee_p: np.ndarray
    ee_roll: float
    a_local: np.ndarray
    pos_err: float
    objective: float
    iterations: int
    kkt_residual: float
    violation: float
    solve_time: float
    status: str
    cold_start: bool
    overrun: bool
    degraded: bool

    @property
    def lateral(self) -> float:
        return float(math.hypot(self.a_local[0], self.a_local[1]))


class TeleopLog:
    """Append-only per-cycle records with monotone timestamps."""

    def __init__(self):
        self.records: list[CycleRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rec: CycleRecord) -> None:
        if self.records and rec.t <= self.records[-1].t:
            raise ValueError("log timestamps must be strictly increasing")
        self.records.append(rec)

    def write_csv(self, path) -> None:
        n = len(self.records[0].x0) // 2 if self.records else 0
        header = (["t"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)]
                  + ["tgt_x", "tgt_y", "tgt_z", "tgt_roll",
                     "ee_x", "ee_y", "ee_z", "ee_roll",
                     "alocal_x", "alocal_y", "alocal_z", "lateral", "pos_err",
                     "objective", "iterations", "kkt", "violation", "solve_ms",
                     "status", "cold_start", "overrun", "degraded"])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in self.records:
                w.writerow([r.t, *r.x0, *r.target_p, r.target_roll,
                            *r.ee_p, r.ee_roll, *r.a_local, r.lateral, r.pos_err,
                            r.objective, r.iterations, r.kkt_residual, r.violation,
                            r.solve_time * 1e3, r.status,
                            int(r.cold_start), int(r.overrun), int(r.degraded)])

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps({
                    "t": r.t, "x0": list(r.x0), "target_p": list(r.target_p),
                    "target_roll": r.target_roll, "ee_p": list(r.ee_p),
                    "ee_roll": r.ee_roll, "a_local": list(r.a_local),
                    "lateral": r.lateral, "pos_err": r.pos_err,
                    "objective": r.objective, "iterations": r.iterations,
                    "kkt": r.kkt_residual, "violation": r.violation,
                    "solve_ms": r.solve_time * 1e3, "status": r.status,
                    "cold_start": r.cold_start, "overrun": r.overrun,
                    "degraded": r.degraded}) + "\n")


def roll_angle(R: np.ndarray) -> float:
    """Rotation of the tool z-plane about world x (the Fig-style roll panel)."""
    return float(math.atan2(R[2, 1], R[2, 2]))


def plant_step(plant: PlantState, plan: ocp.SolveResult, dt_sim: float,
               plan_t0: float | None = None, lag: float = 0.0) -> PlantState:
    """Advance the ideal-tracking plant dt_sim along a plan.

    The plan's node 0 is anchored at plan_t0 (defaults to the plant's current
    time); the target state interpolates the plan nodes linearly and holds the
    last node beyond the horizon. With lag > 0 the plant relaxes toward the
    target state with first-order dynamics instead of matching it exactly.
    """
    if plan_t0 is None:
        plan_t0 = plant.t
    t_new = plant.t + dt_sim
    target = interpolate_plan(plan, t_new - plan_t0)
    if lag > 0.0:
        blend = 1.0 - math.exp(-dt_sim / lag)
        x_new = plant.x + blend * (target - plant.x)
    else:
        x_new = target
    return PlantState(x=x_new, t=t_new)


def interpolate_plan(plan: ocp.SolveResult, elapsed: float) -> np.ndarray:
    """Plan state at `elapsed` after node 0; clamped to the horizon ends."""
    N = len(plan.U)
    dt = _plan_dt(plan)
    s = ocp._snap_to_node(elapsed / dt)
    if s <= 0.0:
        return plan.X[0].copy()
    if s >= N:
        return plan.X[N].copy()
    i = int(math.floor(s))
    f = s - i
    return (1.0 - f) * plan.X[i] + f * plan.X[i + 1]


def plan_control(plan: ocp.SolveResult, elapsed: float) -> np.ndarray:
    """Piecewise-constant control active at `elapsed`; zero beyond the horizon."""
    N = len(plan.U)
    dt = _plan_dt(plan)
    j = int(math.floor(elapsed / dt + 1e-12))
    if j < 0 or j >= N:
        return np.zeros(plan.U.shape[1])
    return plan.U[j].copy()


def _plan_dt(plan: ocp.SolveResult) -> float:
    # plans carry no dt of their own; the runner always uses the loop period
    return 1.0 / LOOP_RATE


class TeleopSession:
    """State of one closed-loop run: problem, plant, warm start, log."""

    def __init__(self, arm: ArmConfig, params: ParamSet, lag: float = 0.0):
        self.arm = arm
        self.params = params
        self.prob = ocp.build(arm, params)
        self.lag = float(lag)
        n = arm.dh.n_q
        x0 = np.concatenate([arm.q_home, np.zeros(n)])
        self.plant = PlantState(x=x0, t=0.0)
        self.buffer = SampleBuffer()
        self.warm: ocp.WarmStart | None = None
        self.plan: ocp.SolveResult | None = None
        self.plan_t0 = 0.0
        self.log = TeleopLog()

    def ingest(self, sample: TargetSample) -> bool:
        """Push a target sample; stale (non-increasing t) samples are dropped."""
        try:
            self.buffer.append(sample)
            return True
        except ValueError:
            return False

    def current_pose(self) -> Pose:
        n = self.arm.dh.n_q
        return self.prob.kin.forward(self.plant.x[:n])


def run_cycle(session: TeleopSession, now: float) -> ocp.SolveResult:
    """One 20 Hz cycle at simulated time `now`; returns the active plan."""
    prob, params, arm = session.prob, session.params, session.arm
    n = arm.dh.n_q
    dt = params.dt

    samples = session.buffer.snapshot()
    samples = [s for s in samples if s.t <= now + 1e-12]
    ref = predict_from_samples(samples[-(params.twist_window + 1):], dt,
                               params.N, arm.reach, params.twist_window)
    if ref is None:
        # no operator input yet: hold the current end-effector pose
        pose = session.current_pose()
        ref = ReferenceTrajectory(np.tile(pose.p, (params.N, 1)),
                                  np.tile(pose.R, (params.N, 1, 1)), dt)
        target_p, target_R = pose.p, pose.R
    else:
        last = samples[-1].pose
        target_p, target_R = clip_to_reach(last.p, arm.reach), last.R

    cold_start = session.warm is None
    x0 = session.plant.x
    guess = None
    if session.warm is not None:
        elapsed = now - session.warm.t0
        _, Xg, Ug = ocp.shift_warm_start(session.warm, elapsed, prob)
        guess = (Xg, Ug)

    degraded = False
    try:
        res = ocp.solve(prob, x0, ref, guess)
        ok = (np.all(np.isfinite(res.U)) and np.all(np.isfinite(res.X))
              and res.max_constraint_violation <= prob.settings.tol_feasibility)
    except Exception:
        res, ok = None, False
    if ok:
        session.plan = res
        session.plan_t0 = now
        session.warm = ocp.WarmStart(res, now)
    else:
        degraded = True
        if session.plan is None:
            # never had a plan: hold the current state with zero control
            X = np.tile(x0, (params.N + 1, 1))
            session.plan = ocp.SolveResult(
                X=X, U=np.zeros((params.N, n)), objective=float("inf"),
                iterations=0, wall_time=0.0, kkt_residual=float("inf"),
                max_constraint_violation=0.0, status="max-iter")
            session.plan_t0 = now

    plan = session.plan
    session.plant = plant_step(session.plant, plan, dt,
                               plan_t0=session.plan_t0, lag=session.lag)

    # executed point at cycle end, with the control active on its segment
    seg = session.plant.t - session.plan_t0
    x_exec = session.plant.x
    u_exec = plan_control(plan, seg - dt)
    pose = prob.kin.forward(x_exec[:n])
    a_local = prob.kin.local_acceleration(x_exec[:n], x_exec[n:], u_exec)

    active = res if res is not None else plan
    session.log.append(CycleRecord(
        t=now, x0=np.array(x0), target_p=np.array(target_p),
        target_roll=roll_angle(target_R), ee_p=pose.p,
        ee_roll=roll_angle(pose.R), a_local=a_local,
        pos_err=float(np.linalg.norm(pose.p - target_p)),
        objective=float(active.objective), iterations=active.iterations,
        kkt_residual=float(active.kkt_residual),
        violation=float(active.max_constraint_violation),
        solve_time=float(active.wall_time), status=active.status,
        cold_start=cold_start, overrun=active.wall_time > dt,
        degraded=degraded))
    return plan


def replay(samples: list[TargetSample], arm: ArmConfig, params: ParamSet,
           lag: float = 0.0) -> TeleopLog:
    """Deterministic offline run of the full loop at simulated 20 Hz.

    The recording duration is t_last - t_first; the log holds exactly
    ceil(duration * 20) cycles (empty recording -> empty log).
    """
    session = TeleopSession(arm, params, lag=lag)
    if not samples:
        return session.log
    t0 = samples[0].t
    duration = samples[-1].t - t0
    cycles = int(math.ceil(duration * LOOP_RATE))
    session.plant.t = t0
    idx = 0
    for k in range(cycles):
        now = t0 + k / LOOP_RATE
        while idx < len(samples) and samples[idx].t <= now + 1e-12:
            session.ingest(samples[idx])
            idx += 1
        run_cycle(session, now)
    return session.log


def metrics(log: TeleopLog) -> dict:
    """Summary statistics of a run; raises on an empty log."""
    if len(log) == 0:
        raise ValueError("cannot summarize an empty log")
    lat = np.array([r.lateral for r in log.records])
    err = np.array([r.pos_err for r in log.records])
    st = np.array([r.solve_time for r in log.records])
    return {
        "cycles": len(log),
        "lateral_mean": float(lat.mean()),
        "lateral_max": float(lat.max()),
        "rms_pos_err": float(np.sqrt(np.mean(err * err))),
        "solve_ms_mean": float(st.mean() * 1e3),
        "solve_ms_max": float(st.max() * 1e3),
        "solve_ms_p50": float(np.percentile(st, 50) * 1e3),
        "solve_ms_p99": float(np.percentile(st, 99) * 1e3),
        "iterations_mean": float(np.mean([r.iterations for r in log.records])),
        "cold_starts": int(sum(r.cold_start for r in log.records)),
        "degraded": int(sum(r.degraded for r in log.records)),
        "overruns": int(sum(r.overrun for r in log.records)),
    }
