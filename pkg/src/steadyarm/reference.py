"""Operator-target prediction and input retargeting.

The planner tracks a short reference trajectory extrapolated from recent
operator samples under a constant-twist assumption: positions continue along
the fitted straight line, orientations continue rotating about the fitted
angular-velocity axis. Predictions that leave the arm's reach sphere are
clipped radially.

Recording file format (shared with the replay CLI): JSON lines, one sample
per line, e.g.

    {"t": 0.05, "p": [0.45, 0.10, 0.35], "quat": [1.0, 0.0, 0.0, 0.0]}

with `t` in seconds (strictly increasing), `p` the target position in meters
(base frame) and `quat` the target orientation as a unit quaternion in
w, x, y, z order.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kinematics import Pose, rotation_about, rotation_log


class RecordingError(ValueError):
    """Malformed recording file; message includes the 1-based line number."""


@dataclass(frozen=True)
class TargetSample:
    """One time-stamped operator target (already mapped to robot task space)."""

    t: float
    pose: Pose


@dataclass
class ReferenceTrajectory:
    """Predicted target poses at nodes k = 1..N (positions (N,3), rotations (N,3,3))."""

    positions: np.ndarray
    rotations: np.ndarray
    dt: float

    @property
    def horizon(self) -> int:
        return len(self.positions)

    def validate(self, reach: float, tol: float = 1e-9) -> None:
        if len(self.rotations) != self.horizon:
            raise ValueError("positions/rotations length mismatch")
        radii = np.linalg.norm(self.positions, axis=1)
        if radii.max(initial=0.0) > reach + 1e-12:
            raise ValueError(f"reference leaves reach sphere: {radii.max():.6f} > {reach}")
        for R in self.rotations:
            Pose(np.zeros(3), R).validate(tol)


def clip_to_reach(p: np.ndarray, reach: float) -> np.ndarray:
    """Project p radially onto the reach sphere if it lies outside."""
    p = np.asarray(p, dtype=float)
    r = np.linalg.norm(p)
    if r <= reach or r == 0.0:
        return p
    return p * (reach / r)


def estimate_twist(samples: Sequence[TargetSample], window: int = 5):
    """Fit (v, omega) to the most recent samples.

    v is the least-squares slope of position over time; omega averages the
    per-step axis-angle rates of consecutive orientations. Fewer than two
    samples (or zero elapsed time) yield a zero twist.
    """
    recent = list(samples)[-window:]
    if len(recent) < 2:
        return np.zeros(3), np.zeros(3)
    t = np.array([s.t for s in recent])
    P = np.array([s.pose.p for s in recent])
    dt_c = t - t.mean()
    denom = float(dt_c @ dt_c)
    if denom <= 0.0:
        return np.zeros(3), np.zeros(3)
    v = (dt_c @ (P - P.mean(axis=0))) / denom
    rates = []
    for prev, cur in zip(recent[:-1], recent[1:]):
        dt = cur.t - prev.t
        if dt > 0.0:
            rates.append(rotation_log(cur.pose.R @ prev.pose.R.T) / dt)
    omega = np.mean(rates, axis=0) if rates else np.zeros(3)
    return v, omega


def predict(p0, R0, v, omega, dt: float, N: int, reach: float) -> ReferenceTrajectory:
    """Constant-twist extrapolation: p_k = clip(p0 + k dt v), R_k = exp([w] k dt) R0."""
    if dt <= 0.0 or N < 1 or reach <= 0.0:
        raise ValueError("need dt > 0, N >= 1, reach > 0")
    p0 = np.asarray(p0, dtype=float)
    positions = np.empty((N, 3))
    rotations = np.empty((N, 3, 3))
    w_norm = np.linalg.norm(omega)
    for k in range(1, N + 1):
        positions[k - 1] = clip_to_reach(p0 + k * dt * np.asarray(v, float), reach)
        rotations[k - 1] = rotation_about(omega, w_norm * k * dt) @ R0 if w_norm else R0
    return ReferenceTrajectory(positions=positions, rotations=rotations, dt=dt)


def predict_from_samples(samples: Sequence[TargetSample], dt: float, N: int,
                         reach: float, window: int = 5) -> ReferenceTrajectory | None:
    """Twist fit + extrapolation from the newest sample; None when no samples."""
    if not samples:
        return None
    v, omega = estimate_twist(samples, window)
    last = samples[-1]
    return predict(last.pose.p, last.pose.R, v, omega, dt, N, reach)


class SampleBuffer:
    """Bounded single-writer / single-reader buffer of TargetSamples."""

    def __init__(self, maxlen: int = 256):
        self._buf: deque[TargetSample] = deque(maxlen=maxlen)
        self._lock = threading.Lock()

    def append(self, sample: TargetSample) -> None:
        with self._lock:
            if self._buf and sample.t <= self._buf[-1].t:
                raise ValueError(
                    f"timestamps must increase: {sample.t} after {self._buf[-1].t}")
            self._buf.append(sample)

    def snapshot(self) -> list[TargetSample]:
        with self._lock:
            return list(self._buf)

    def __len__(self) -> int:
        return len(self._buf)


class Retargeter:
    """Fixed rigid transform from device space to robot task space, with clutch.

    While the clutch is engaged the output target is frozen at its last value;
    on release the stored offset is updated so the target resumes continuously
    from the held pose (the operator re-centers their device without jumps).
    """

    def __init__(self, R_fix: np.ndarray | None = None, t_fix: np.ndarray | None = None):
        self.R_fix = np.eye(3) if R_fix is None else np.asarray(R_fix, float)
        self.t_fix = np.zeros(3) if t_fix is None else np.asarray(t_fix, float)
        self.p_off = np.zeros(3)
        self.R_off = np.eye(3)
        self.engaged = False
        self._held: Pose | None = None

    def _raw(self, p_dev, R_dev) -> Pose:
        return Pose(self.R_off @ (self.R_fix @ np.asarray(p_dev, float) + self.t_fix) + self.p_off,
                    self.R_off @ self.R_fix @ np.asarray(R_dev, float))

    def set_clutch(self, engaged: bool, p_dev=None, R_dev=None) -> None:
        """Engage/disengage; on release re-anchor the offsets at the device pose."""
        if engaged == self.engaged:
            return
        self.engaged = engaged
        if not engaged and self._held is not None and p_dev is not None:
            raw = Pose(self.R_fix @ np.asarray(p_dev, float) + self.t_fix,
                       self.R_fix @ np.asarray(R_dev, float))
            self.R_off = self._held.R @ raw.R.T
            self.p_off = self._held.p - self.R_off @ raw.p

    def apply(self, p_dev, R_dev) -> Pose:
        if self.engaged:
            if self._held is None:
                self._held = self._raw(p_dev, R_dev)
            return self._held
        self._held = self._raw(p_dev, R_dev)
        return self._held


def quat_to_rot(quat) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to rotation matrix."""
    q = np.asarray(quat, dtype=float)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or abs(n - 1.0) > 1e-6:
        raise ValueError(f"quaternion not unit norm: |q| = {n}")
    w, x, y, z = q / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k]) * 2
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def load_recording(path) -> list[TargetSample]:
    """Parse a JSONL recording; raises RecordingError naming the bad line."""
    samples: list[TargetSample] = []
    prev_t = -np.inf
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                t = float(rec["t"])
                p = np.asarray(rec["p"], dtype=float)
                R = quat_to_rot(rec["quat"])
                if p.shape != (3,) or not np.all(np.isfinite(p)):
                    raise ValueError("p must be a finite 3-vector")
                if t <= prev_t:
                    raise ValueError(f"timestamp {t} not increasing")
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise RecordingError(f"{path}: line {lineno}: {exc}") from exc
            prev_t = t
            samples.append(TargetSample(t=t, pose=Pose(p, R)))
    return samples


def save_recording(path, samples: Iterable[TargetSample]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            rec = {"t": round(float(s.t), 9), "p": [float(v) for v in s.pose.p],
                   "quat": [float(v) for v in rot_to_quat(s.pose.R)]}
            fh.write(json.dumps(rec) + "\n")
