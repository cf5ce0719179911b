"""Box limits and sphere self-collision constraints.

Collision pairs are built once from the sphere list: spheres on the same link
or on adjacent links (indices differing by 1) may naturally overlap and are
excluded; every remaining pair (i, j), i < j, must keep

    ||c_i(q) - c_j(q)||^2  >=  (r_i + r_j)^2

The squared form is kept everywhere — no square roots in the constraint path,
so margins stay smooth when centers approach each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .kinematics import ArmKinematics, SphereSpec


@dataclass(frozen=True)
class Limits:
    """Inclusive elementwise bounds on q (rad), qd (rad/s) and u (rad/s^2)."""

    q_min: np.ndarray
    q_max: np.ndarray
    qd_min: np.ndarray
    qd_max: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        for name in ("q_min", "q_max", "qd_min", "qd_max", "u_min", "u_max"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for lo, hi in (("q_min", "q_max"), ("qd_min", "qd_max"), ("u_min", "u_max")):
            a, b = getattr(self, lo), getattr(self, hi)
            if a.shape != b.shape or not np.all(a < b):
                raise ValueError(f"{lo} must be elementwise < {hi}")

    @property
    def n_q(self) -> int:
        return len(self.q_min)

    @property
    def x_min(self) -> np.ndarray:
        return np.concatenate([self.q_min, self.qd_min])

    @property
    def x_max(self) -> np.ndarray:
        return np.concatenate([self.q_max, self.qd_max])

    def clamp_state(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.x_min, self.x_max)


@dataclass(frozen=True)
class CollisionPairSet:
    """Unordered sphere-index pairs (i < j) that must stay separated."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for i, j in self.pairs:
            if not i < j:
                raise ValueError(f"pair ({i},{j}) must satisfy i < j")
            if (i, j) in seen:
                raise ValueError(f"duplicate pair ({i},{j})")
            seen.add((i, j))

    def __len__(self) -> int:
        return len(self.pairs)


def build_pairs(spheres: list[SphereSpec]) -> CollisionPairSet:
    """All pairs whose link indices differ by at least 2."""
    pairs = tuple(
        (i, j)
        for (i, si), (j, sj) in combinations(enumerate(spheres), 2)
        if abs(si.link_index - sj.link_index) >= 2
    )
    return CollisionPairSet(pairs=pairs)


def collision_margins(kin: ArmKinematics, q, spheres: list[SphereSpec],
                      pairs: CollisionPairSet) -> np.ndarray:
    """margin_ij = ||c_i - c_j||^2 - (r_i + r_j)^2 per pair; feasible iff all >= 0."""
    c = kin.sphere_centers(q, spheres)
    out = np.empty(len(pairs))
    for k, (i, j) in enumerate(pairs.pairs):
        d = c[i] - c[j]
        out[k] = d @ d - (spheres[i].radius + spheres[j].radius) ** 2
    return out


def box_violations(x, u, lim: Limits) -> np.ndarray:
    """Positive exceedance per bound, zero where the bound holds (inclusive).

    Order: [q below, q above, qd below, qd above, u below, u above], each n_q wide.
    """
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    n = lim.n_q
    q, qd = x[:n], x[n:]
    return np.concatenate([
        np.maximum(0.0, lim.q_min - q), np.maximum(0.0, q - lim.q_max),
        np.maximum(0.0, lim.qd_min - qd), np.maximum(0.0, qd - lim.qd_max),
        np.maximum(0.0, lim.u_min - u), np.maximum(0.0, u - lim.u_max),
    ])


class CollisionModel:
    """Vectorized margins and q-Jacobians for a fixed sphere/pair set."""

    def __init__(self, kin: ArmKinematics, spheres: list[SphereSpec],
                 pairs: CollisionPairSet | None = None):
        self.kin = kin
        self.spheres = list(spheres)
        self.pairs = build_pairs(self.spheres) if pairs is None else pairs
        self._i = np.array([p[0] for p in self.pairs.pairs], dtype=int)
        self._j = np.array([p[1] for p in self.pairs.pairs], dtype=int)
        self._rsq = np.array([
            (self.spheres[i].radius + self.spheres[j].radius) ** 2
            for i, j in self.pairs.pairs
        ])
        self._links = np.array([s.link_index for s in self.spheres], dtype=int)
        self._locals = np.array([s.local_center for s in self.spheres])  # (n_s, 3)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def _centers(self, Q, with_jacobian, frames=None):
        """World sphere centers (and q-Jacobians) from configurations or frames.

        Centers depend on q only, so precomputed `frames` may come from any
        chain_jets call at the same Q regardless of its velocity/acceleration
        inputs; the first n_q seeds must be the q directions.
        """
        if frames is None:
            Q = np.atleast_2d(np.asarray(Q, float))
            z = np.zeros_like(Q)
            n = Q.shape[1]
            frames = self.kin.chain_jets(Q, z, z, n_seeds=3 * n if with_jacobian else None)
        n = len(frames) - 1
        B = frames[0][1].c0.shape[0]
        ns = len(self.spheres)
        C = np.empty((B, ns, 3))
        dC = np.empty((B, ns, n, 3)) if with_jacobian else None
        for s in range(ns):
            R_jet, p_jet = frames[self._links[s]]
            loc = self._locals[s][:, None]  # (3, 1)
            C[:, s] = (R_jet.c0 @ loc)[..., 0] + p_jet.c0[..., 0]
            if with_jacobian:
                dC[:, s] = (R_jet.d0[:, :n] @ loc)[..., 0] + p_jet.d0[:, :n, :, 0]
        return C, dC

    def margins(self, Q=None, frames=None) -> np.ndarray:
        """(B, n_pairs) margins for configurations Q (B, n_q) or chain frames."""
        if self.n_pairs == 0:
            B = len(np.atleast_2d(Q)) if frames is None else frames[0][1].c0.shape[0]
            return np.zeros((B, 0))
        C, _ = self._centers(Q, with_jacobian=False, frames=frames)
        d = C[:, self._i] - C[:, self._j]
        return np.einsum("bpk,bpk->bp", d, d) - self._rsq

    def margins_and_jacobian(self, Q=None, frames=None):
        """Margins (B, P) and d margin / d q (B, P, n_q)."""
        if self.n_pairs == 0:
            if frames is None:
                Q = np.atleast_2d(np.asarray(Q, float))
                B, n = Q.shape
            else:
                B, n = frames[0][1].c0.shape[0], len(frames) - 1
            return np.zeros((B, 0)), np.zeros((B, 0, n))
        C, dC = self._centers(Q, with_jacobian=True, frames=frames)
        d = C[:, self._i] - C[:, self._j]            # (B, P, 3)
        m = np.einsum("bpk,bpk->bp", d, d) - self._rsq
        dd = dC[:, self._i] - dC[:, self._j]          # (B, P, n, 3)
        J = 2.0 * np.einsum("bpk,bpnk->bpn", d, dd)
        return m, J
