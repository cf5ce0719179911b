"""Discrete-time joint-space model used by the planner.

State x = [q, qdot] (2*n_q), control u = qddot (n_q). The continuous dynamics
are a per-joint double integrator; the zero-order-hold discretization is exact:

    q[k+1]    = q[k] + dt*qdot[k] + dt^2/2 * u[k]
    qdot[k+1] = qdot[k] + dt*u[k]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DiscreteModel:
    n_q: int
    dt: float
    A: np.ndarray = field(repr=False)  # (2n, 2n)
    B: np.ndarray = field(repr=False)  # (2n, n)

    @property
    def n_x(self) -> int:
        return 2 * self.n_q

    @property
    def n_u(self) -> int:
        return self.n_q

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.A @ x + self.B @ u

    def rollout(self, x0: np.ndarray, U: np.ndarray) -> np.ndarray:
        """States x_1..x_N (N, n_x) reached from x0 under controls U (N, n_u)."""
        X = np.empty((len(U), self.n_x))
        x = np.asarray(x0, dtype=float)
        for k, u in enumerate(U):
            x = self.step(x, u)
            X[k] = x
        return X


def discretize(n_q: int, dt: float) -> DiscreteModel:
    """Exact zero-order-hold discretization of the double integrator."""
    if n_q < 1 or dt <= 0.0:
        raise ValueError("need n_q >= 1 and dt > 0")
    eye = np.eye(n_q)
    A = np.block([[eye, dt * eye], [np.zeros((n_q, n_q)), eye]])
    B = np.vstack([0.5 * dt * dt * eye, dt * eye])
    return DiscreteModel(n_q=n_q, dt=dt, A=A, B=B)
