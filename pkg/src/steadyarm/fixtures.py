"""Synthetic operator recordings used by the benchmark and comparison tools.

The "aggressive" fixture is a lateral sinusoidal sweep (0.3 m amplitude at
0.5 Hz) combined with a one-sided roll excursion about the world x axis that
peaks at 90 degrees (theta(t) = (pi/4) (1 - cos(2 pi f_roll t)), so the glass
tilts fully sideways and returns once per 4 s). Sampled at the loop rate it
is dynamic enough to separate tracking-focused from slosh-focused parameter
sets while staying inside the workspace and clear of self-collisions.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .kinematics import Pose, rotation_about
from .reference import TargetSample

SWEEP_CENTER = np.array([0.5, 0.0, 0.4])
SWEEP_AMPLITUDE = 0.3
SWEEP_HZ = 0.5
ROLL_HZ = 0.25
ROLL_PEAK = np.pi / 2


def aggressive_recording(duration: float = 12.0, rate: float = 20.0,
                         seed: int | None = None) -> list[TargetSample]:
    """Deterministic sweep-and-roll target stream; optional seeded jitter."""
    n = int(round(duration * rate)) + 1
    rng = np.random.default_rng(seed) if seed is not None else None
    x_axis = np.array([1.0, 0.0, 0.0])
    samples = []
    for i in range(n):
        t = i / rate
        p = SWEEP_CENTER + np.array(
            [0.0, SWEEP_AMPLITUDE * np.sin(2.0 * np.pi * SWEEP_HZ * t), 0.0])
        theta = 0.5 * ROLL_PEAK * (1.0 - np.cos(2.0 * np.pi * ROLL_HZ * t))
        if rng is not None:
            p = p + rng.normal(0.0, 1e-4, 3)
            theta = theta + rng.normal(0.0, 1e-4)
        samples.append(TargetSample(t, Pose(p, rotation_about(x_axis, theta))))
    return samples


def packaged_recording_path(name: str = "aggressive") -> Path:
    """Filesystem path of a recording shipped with the package."""
    p = resources.files("steadyarm").joinpath("data").joinpath(
        "recordings").joinpath(f"{name}.jsonl")
    return Path(str(p))
