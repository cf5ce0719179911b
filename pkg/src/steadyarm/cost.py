"""Stage costs and the discretized objective J_d.

Four tracking/effort terms plus the slosh term:

    l1p = (p - p_ref)' Qp (p - p_ref)          position tracking
    l1o = w1o * ||I - R R_ref'||_F^2           orientation tracking
    l2a = qd' Qa qd,  l2b = u' Qb u            joint velocity / acceleration
    l3  = (a_local - g)' Q3 (a_local - g)      lateral (slosh) acceleration

with a_local = R(q) (p_dd + g). The total is a left-endpoint Riemann sum over
nodes k = 1..N (control terms use u_{k-1}), scaled by dt. There is no
terminal cost.

Every term is a weighted sum of squares, so the whole objective is exposed as
a stacked residual vector r with J_d = r'r; the solver consumes r and its
Jacobian (Gauss-Newton), while total_cost/total_cost_gradient remain plain
functions for direct use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import GRAVITY, ArmKinematics
from .reference import ReferenceTrajectory


@dataclass(frozen=True)
class Weights:
    """Objective weights; all entries must be >= 0."""

    w1p: np.ndarray  # (3,)
    w1o: float
    w2a: np.ndarray  # (n_q,)
    w2b: np.ndarray  # (n_q,)
    w3: float

    def __post_init__(self):
        object.__setattr__(self, "w1p", np.asarray(self.w1p, dtype=float))
        object.__setattr__(self, "w2a", np.asarray(self.w2a, dtype=float))
        object.__setattr__(self, "w2b", np.asarray(self.w2b, dtype=float))
        if (self.w1p < 0).any() or self.w1o < 0 or (self.w2a < 0).any() \
                or (self.w2b < 0).any() or self.w3 < 0:
            raise ValueError("weights must be nonnegative")


def cost_position(p, p_ref, w1p) -> float:
    e = np.asarray(p, float) - np.asarray(p_ref, float)
    return float(e @ (np.asarray(w1p, float) * e))


def cost_orientation(R, R_ref, w1o) -> float:
    E = np.eye(3) - R @ np.asarray(R_ref).T
    return float(w1o * np.sum(E * E))


def cost_motion(qd, u, w2a, w2b) -> float:
    qd = np.asarray(qd, float)
    u = np.asarray(u, float)
    return float(qd @ (np.asarray(w2a, float) * qd) + u @ (np.asarray(w2b, float) * u))


def cost_slosh(kin: ArmKinematics, q, qd, u, w3, g=GRAVITY) -> float:
    e = kin.local_acceleration(q, qd, u, g) - np.asarray(g, float)
    return float(w3 * (e @ e))


class CostModel:
    """Residual form of J_d for one (kinematics, weights, dt, N) tuple.

    Residual layout per node k (k = 1..N), all scaled by sqrt(dt):
      [0:3)        sqrt(w1p) * (p_k - p_ref,k)
      [3:12)       sqrt(w1o) * vec(I - R_k R_ref,k')
      [12:12+n)    sqrt(w2a) * qd_k
      [12+n:12+2n) sqrt(w2b) * u_{k-1}
      [12+2n:15+2n) sqrt(w3) * (a_local,k - g)
    Local Jacobians are w.r.t. (q_k, qd_k, u_{k-1}), shape (m, 3n).
    """

    def __init__(self, kin: ArmKinematics, weights: Weights, dt: float, g=GRAVITY):
        self.kin = kin
        self.w = weights
        self.dt = float(dt)
        self.g = np.asarray(g, float)
        n = kin.n_q
        self.n_q = n
        self.m = 15 + 2 * n  # residual rows per node
        sdt = np.sqrt(dt)
        self._sp = np.sqrt(weights.w1p) * sdt
        self._so = np.sqrt(weights.w1o) * sdt
        self._sv = np.sqrt(weights.w2a) * sdt
        self._su = np.sqrt(weights.w2b) * sdt
        self._ss = np.sqrt(weights.w3) * sdt

    def _check(self, X, U, ref: ReferenceTrajectory):
        N = ref.horizon
        X = np.asarray(X, float)
        U = np.asarray(U, float)
        if X.shape != (N + 1, 2 * self.n_q) or U.shape != (N, self.n_q):
            raise ValueError(
                f"shape mismatch: X {X.shape}, U {U.shape} for N={N}, n_q={self.n_q}")
        return X, U, N

    def residuals(self, X, U, ref: ReferenceTrajectory, with_jacobian: bool = False,
                  frames=None):
        """Residual matrix (N, m); optionally also d r_k / d(q_k, qd_k, u_{k-1}).

        `frames` may pass a precomputed chain_jets result for (X[1:], U) —
        seeded with 3 n_q seeds when with_jacobian — to share one chain pass
        with other consumers.
        """
        X, U, N = self._check(X, U, ref)
        n = self.n_q
        if frames is None:
            seeds = 3 * n if with_jacobian else None
            frames = self.kin.chain_jets(X[1:, :n], X[1:, n:], U, n_seeds=seeds)
        R_jet, p_jet = frames[-1]
        p = p_jet.c0[..., 0]            # (N, 3)
        pdd = p_jet.c2[..., 0]          # (N, 3)
        R = R_jet.c0                    # (N, 3, 3)
        Rref_T = np.transpose(ref.rotations, (0, 2, 1))
        E = np.eye(3) - R @ Rref_T      # (N, 3, 3)
        a_local = (R @ (pdd + self.g)[..., None])[..., 0]

        r = np.empty((N, self.m))
        r[:, 0:3] = self._sp * (p - ref.positions)
        r[:, 3:12] = self._so * E.reshape(N, 9)
        r[:, 12:12 + n] = self._sv * X[1:, n:]
        r[:, 12 + n:12 + 2 * n] = self._su * U
        r[:, 12 + 2 * n:] = self._ss * (a_local - self.g)
        if not with_jacobian:
            return r

        S = 3 * n
        J = np.zeros((N, self.m, S))
        dp = p_jet.d0[..., 0]           # (N, S, 3)
        dpdd = p_jet.d2[..., 0]         # (N, S, 3)
        dR = R_jet.d0                   # (N, S, 3, 3)
        J[:, 0:3, :] = self._sp[:, None] * np.transpose(dp, (0, 2, 1))
        dE = -(dR @ Rref_T[:, None])    # (N, S, 3, 3)
        J[:, 3:12, :] = self._so * np.transpose(dE.reshape(N, S, 9), (0, 2, 1))
        idx = np.arange(n)
        J[:, 12 + idx, n + idx] = self._sv
        J[:, 12 + n + idx, 2 * n + idx] = self._su
        da = (dR @ (pdd + self.g)[:, None, :, None])[..., 0] + (
            R[:, None] @ dpdd[..., None])[..., 0]  # (N, S, 3)
        J[:, 12 + 2 * n:, :] = self._ss * np.transpose(da, (0, 2, 1))
        return r, J

    def total(self, X, U, ref: ReferenceTrajectory) -> float:
        r = self.residuals(X, U, ref)
        return float(np.sum(r * r))

    def gradient(self, X, U, ref: ReferenceTrajectory):
        """Exact gradient of J_d: (dJ/dX (N+1, 2n), dJ/dU (N, n)); row 0 of dX is 0."""
        r, J = self.residuals(X, U, ref, with_jacobian=True)
        n = self.n_q
        g_loc = 2.0 * np.einsum("kms,km->ks", J, r)  # (N, 3n)
        gX = np.zeros((len(X), 2 * n))
        gX[1:, :n] = g_loc[:, :n]
        gX[1:, n:] = g_loc[:, n:2 * n]
        gU = g_loc[:, 2 * n:]
        return gX, gU


def total_cost(kin: ArmKinematics, X, U, ref: ReferenceTrajectory,
               w: Weights, dt: float) -> float:
    """J_d = dt * sum_{k=1..N} (l1p + l1o + l2a + l2b + l3) at node k."""
    return CostModel(kin, w, dt).total(X, U, ref)


def total_cost_gradient(kin: ArmKinematics, X, U, ref: ReferenceTrajectory,
                        w: Weights, dt: float):
    return CostModel(kin, w, dt).gradient(X, U, ref)
