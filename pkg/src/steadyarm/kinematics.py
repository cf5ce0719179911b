"""Forward and differential kinematics of a serial arm from a DH table.

Frames follow the standard (distal) Denavit-Hartenberg convention: joint i
contributes A_i = Rz(theta_i) Tz(d_i) Tx(a_i) Rx(alpha_i) with
theta_i = q_i + theta_offset_i, and frame i is the product A_1...A_i.
Frame 0 is the fixed base.

Local acceleration convention: a_local = R(q) * (p_dd + g) with R(q) the
base-to-end-effector rotation from the DH product and g = [0, 0, 9.81].
The slosh cost and the lateral-acceleration metric both use this same
convention, so results are self-consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets

GRAVITY = np.array([0.0, 0.0, 9.81])


class ConfigurationError(ValueError):
    """Raised for invalid arm geometry or sphere definitions."""


@dataclass(frozen=True)
class DhTable:
    """Per-joint DH rows (a [m], d [m], alpha [rad], theta_offset [rad])."""

    a: np.ndarray
    d: np.ndarray
    alpha: np.ndarray
    theta_offset: np.ndarray

    def __post_init__(self):
        for name in ("a", "d", "alpha", "theta_offset"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        n = len(self.a)
        if not (len(self.d) == len(self.alpha) == len(self.theta_offset) == n) or n < 1:
            raise ConfigurationError("DH table rows must agree in length")
        for name in ("a", "d", "alpha", "theta_offset"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigurationError(f"non-finite DH entry in {name}")

    @property
    def n_q(self) -> int:
        return len(self.a)


@dataclass
class Pose:
    p: np.ndarray  # (3,) position [m]
    R: np.ndarray  # (3,3) rotation, base to frame

    def validate(self, tol: float = 1e-9) -> None:
        err = np.abs(self.R.T @ self.R - np.eye(3)).max()
        det = np.linalg.det(self.R)
        if err > tol or abs(det - 1.0) > tol:
            raise ValueError(f"not a rotation: orthonormality {err:.2e}, det {det:.12f}")


@dataclass(frozen=True)
class SphereSpec:
    """Collision sphere rigidly attached to a link frame."""

    sphere_id: str
    link_index: int
    local_center: np.ndarray  # (3,) in link frame [m]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "local_center", np.asarray(self.local_center, dtype=float))
        if self.radius <= 0.0:
            raise ConfigurationError(f"sphere {self.sphere_id}: radius must be > 0")


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of `angle` about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.eye(3)
    k = axis / n
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a rotation matrix, angle in [0, pi]."""
    tr = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(tr)
    if angle < 1e-12:
        return np.zeros(3)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(w)
    if s > 1e-8:
        return (angle / s) * w
    # angle near pi: extract the axis from the symmetric part
    axis_sq = np.clip((np.diag(R) + 1.0) / 2.0, 0.0, None)
    axis = np.sqrt(axis_sq)
    k = int(np.argmax(axis))
    for j in range(3):
        if j != k and R[k, j] + R[j, k] < 0:
            axis[j] = -axis[j]
    return angle * axis / np.linalg.norm(axis)


def local_from_world(R: np.ndarray, p_dd: np.ndarray, g: np.ndarray = GRAVITY) -> np.ndarray:
    """Acceleration in the end-effector frame: R * (p_dd + g)."""
    return R @ (np.asarray(p_dd, float) + np.asarray(g, float))


class ArmKinematics:
    """Kinematic queries for one DH-defined arm. Pure functions of the inputs."""

    def __init__(self, dh: DhTable):
        self.dh = dh
        n = dh.n_q
        ca, sa = np.cos(dh.alpha), np.sin(dh.alpha)
        # A_i rotation = cos(theta)*Mc + sin(theta)*Ms + Mk; translation likewise
        self._mc = np.zeros((n, 3, 3))
        self._ms = np.zeros((n, 3, 3))
        self._mk = np.zeros((n, 3, 3))
        self._mc[:, 0, 0] = 1.0
        self._mc[:, 1, 1] = ca
        self._mc[:, 1, 2] = -sa
        self._ms[:, 0, 1] = -ca
        self._ms[:, 0, 2] = sa
        self._ms[:, 1, 0] = 1.0
        self._mk[:, 2, 1] = sa
        self._mk[:, 2, 2] = ca
        self._tc = np.zeros((n, 3, 1))
        self._ts = np.zeros((n, 3, 1))
        self._tk = np.zeros((n, 3, 1))
        self._tc[:, 0, 0] = dh.a
        self._ts[:, 1, 0] = dh.a
        self._tk[:, 2, 0] = dh.d

    @property
    def n_q(self) -> int:
        return self.dh.n_q

    def frames(self, q: np.ndarray) -> list[Pose]:
        """All frames base..end-effector (n_q + 1 poses) at configuration q."""
        q = np.asarray(q, dtype=float)
        out = [Pose(np.zeros(3), np.eye(3))]
        R, p = np.eye(3), np.zeros(3)
        th = q + self.dh.theta_offset
        c, s = np.cos(th), np.sin(th)
        for i in range(self.n_q):
            Ra = c[i] * self._mc[i] + s[i] * self._ms[i] + self._mk[i]
            ta = (c[i] * self._tc[i] + s[i] * self._ts[i] + self._tk[i])[:, 0]
            p = p + R @ ta
            R = R @ Ra
            out.append(Pose(p.copy(), R.copy()))
        return out

    def forward(self, q: np.ndarray) -> Pose:
        return self.frames(q)[-1]

    def sphere_centers(self, q: np.ndarray, spheres: list[SphereSpec]) -> np.ndarray:
        """World centers (n_s, 3), order matching the sphere list."""
        fr = self.frames(q)
        out = np.empty((len(spheres), 3))
        for j, sp in enumerate(spheres):
            if not (0 <= sp.link_index <= self.n_q):
                raise ConfigurationError(
                    f"sphere {sp.sphere_id}: link_index {sp.link_index} outside 0..{self.n_q}")
            f = fr[sp.link_index]
            out[j] = f.R @ sp.local_center + f.p
        return out

    # -- jet-propagated quantities (position/rotation rates and gradients) --

    def chain_jets(self, Q, Qd, Qdd, n_seeds: int | None = None) -> list[tuple[jets.Jet, jets.Jet]]:
        """Frame jets for a batch of states.

        Q, Qd, Qdd: (B, n_q) joint angles, velocities, accelerations. When
        n_seeds is given it must be 3*n_q and the seed order is
        [q_0..q_{n-1}, qd_0.., qdd_0..]. Returns n_q+1 (R_jet, p_jet) pairs;
        p jets are (B, 3, 1) columns.
        """
        Q = np.atleast_2d(np.asarray(Q, float))
        Qd = np.atleast_2d(np.asarray(Qd, float))
        Qdd = np.atleast_2d(np.asarray(Qdd, float))
        B, n = Q.shape
        batch = (B,)
        out = [(jets.const(np.eye(3), batch, n_seeds),
                jets.const(np.zeros((3, 1)), batch, n_seeds))]
        R = p = None
        for i in range(n):
            if n_seeds is None:
                d0 = d1 = d2 = None
            else:
                d0 = np.zeros((B, n_seeds))
                d1 = np.zeros((B, n_seeds))
                d2 = np.zeros((B, n_seeds))
                d0[:, i] = 1.0
                d1[:, n + i] = 1.0
                d2[:, 2 * n + i] = 1.0
            th = jets.scalar(Q[:, i] + self.dh.theta_offset[i], Qd[:, i], Qdd[:, i], d0, d1, d2)
            s, c = jets.sincos(th)
            Ra = jets.affine(c, s, self._mc[i], self._ms[i], self._mk[i])
            ta = jets.affine(c, s, self._tc[i], self._ts[i], self._tk[i])
            if i == 0:
                R, p = Ra, ta
            else:
                p = jets.add(p, jets.matmul(R, ta))
                R = jets.matmul(R, Ra)
            out.append((R, p))
        return out

    def ee_acceleration(self, q, qd, qdd) -> np.ndarray:
        """Second time derivative of the end-effector position [m/s^2]."""
        _, p = self.chain_jets(q, qd, qdd)[-1]
        return p.c2[0, :, 0]

    def ee_velocity(self, q, qd) -> np.ndarray:
        _, p = self.chain_jets(q, qd, np.zeros_like(np.atleast_1d(q)))[-1]
        return p.c1[0, :, 0]

    def position_jacobian(self, q) -> np.ndarray:
        """d p / d q, shape (3, n_q)."""
        n = self.n_q
        z = np.zeros(n)
        _, p = self.chain_jets(q, z, z, n_seeds=3 * n)[-1]
        return p.d0[0, :n, :, 0].T

    def local_acceleration(self, q, qd, qdd, g: np.ndarray = GRAVITY) -> np.ndarray:
        """R(q) * (p_dd + g): container acceleration in the end-effector frame."""
        R, p = self.chain_jets(q, qd, qdd)[-1]
        return local_from_world(R.c0[0], p.c2[0, :, 0], g)
