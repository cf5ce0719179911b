"""Truncated Taylor arithmetic with forward parameter tangents.

A time-dependent quantity y(t) evaluated at t=0 is carried as the triple
(y, dy/dt, d2y/dt2); optionally each coefficient also carries its partial
derivatives with respect to a fixed block of S seed parameters. Propagating
these jets through the kinematic chain yields end-effector position,
rotation and acceleration together with exact gradients, all from one
mechanism (cross-checked against finite differences in the tests).

Shape conventions: coefficients are batched arrays (..., n, m) for matrices
or (...,) for scalars; tangents insert a seed axis before the matrix axes,
i.e. (..., S, n, m) and (..., S). Either all three tangent blocks are
present or none.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Jet:
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    d0: np.ndarray | None = None
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None

    @property
    def has_tangents(self) -> bool:
        return self.d0 is not None


def const(value: np.ndarray, batch_shape: tuple[int, ...], n_seeds: int | None) -> Jet:
    """Jet of a constant matrix broadcast over a batch; zero rates and tangents."""
    value = np.asarray(value, dtype=float)
    c0 = np.broadcast_to(value, batch_shape + value.shape).copy()
    z = np.zeros_like(c0)
    if n_seeds is None:
        return Jet(c0, z, z.copy())
    dz = np.zeros(batch_shape + (n_seeds,) + value.shape)
    return Jet(c0, z, z.copy(), dz, np.zeros_like(dz), np.zeros_like(dz))


def scalar(c0, c1, c2, d0=None, d1=None, d2=None) -> Jet:
    return Jet(np.asarray(c0, float), np.asarray(c1, float), np.asarray(c2, float),
               None if d0 is None else np.asarray(d0, float),
               None if d1 is None else np.asarray(d1, float),
               None if d2 is None else np.asarray(d2, float))


def sincos(theta: Jet) -> tuple[Jet, Jet]:
    """sin and cos of a scalar jet."""
    s0, c0 = np.sin(theta.c0), np.cos(theta.c0)
    t1, t2 = theta.c1, theta.c2
    s1 = c0 * t1
    s2 = c0 * t2 - s0 * t1 * t1
    c1 = -s0 * t1
    c2 = -s0 * t2 - c0 * t1 * t1
    if not theta.has_tangents:
        return Jet(s0, s1, s2), Jet(c0, c1, c2)
    # expand coefficient arrays over the seed axis
    s0e, c0e = s0[..., None], c0[..., None]
    t1e, t2e = t1[..., None], t2[..., None]
    dt0, dt1, dt2 = theta.d0, theta.d1, theta.d2
    ds0 = c0e * dt0
    dc0 = -s0e * dt0
    ds1 = -s0e * dt0 * t1e + c0e * dt1
    dc1 = -c0e * dt0 * t1e - s0e * dt1
    ds2 = -s0e * dt0 * t2e + c0e * dt2 - c0e * dt0 * t1e * t1e - 2.0 * s0e * t1e * dt1
    dc2 = -c0e * dt0 * t2e - s0e * dt2 + s0e * dt0 * t1e * t1e - 2.0 * c0e * t1e * dt1
    return Jet(s0, s1, s2, ds0, ds1, ds2), Jet(c0, c1, c2, dc0, dc1, dc2)


def outer(a: Jet, m: np.ndarray) -> Jet:
    """Scalar jet times a constant matrix."""
    m = np.asarray(m, float)
    c0 = a.c0[..., None, None] * m
    c1 = a.c1[..., None, None] * m
    c2 = a.c2[..., None, None] * m
    if not a.has_tangents:
        return Jet(c0, c1, c2)
    d0 = a.d0[..., None, None] * m
    d1 = a.d1[..., None, None] * m
    d2 = a.d2[..., None, None] * m
    return Jet(c0, c1, c2, d0, d1, d2)


def add(*jets: Jet) -> Jet:
    a = jets[0]
    c0, c1, c2 = a.c0, a.c1, a.c2
    for b in jets[1:]:
        c0 = c0 + b.c0
        c1 = c1 + b.c1
        c2 = c2 + b.c2
    if not a.has_tangents:
        return Jet(c0, c1, c2)
    d0, d1, d2 = a.d0, a.d1, a.d2
    for b in jets[1:]:
        d0 = d0 + b.d0
        d1 = d1 + b.d1
        d2 = d2 + b.d2
    return Jet(c0, c1, c2, d0, d1, d2)


def affine(c: Jet, s: Jet, mc: np.ndarray, ms: np.ndarray, mk: np.ndarray) -> Jet:
    """c*Mc + s*Ms + Mk for scalar jets (c, s) and constant matrices.

    Fused form of outer(c, Mc) + outer(s, Ms) + const(Mk); the constant only
    enters the zeroth Taylor coefficient.
    """
    c0 = c.c0[..., None, None] * mc + s.c0[..., None, None] * ms + mk
    c1 = c.c1[..., None, None] * mc + s.c1[..., None, None] * ms
    c2 = c.c2[..., None, None] * mc + s.c2[..., None, None] * ms
    if not c.has_tangents:
        return Jet(c0, c1, c2)
    d0 = c.d0[..., None, None] * mc + s.d0[..., None, None] * ms
    d1 = c.d1[..., None, None] * mc + s.d1[..., None, None] * ms
    d2 = c.d2[..., None, None] * mc + s.d2[..., None, None] * ms
    return Jet(c0, c1, c2, d0, d1, d2)


def _ex(value: np.ndarray) -> np.ndarray:
    # expand a coefficient array with a length-1 seed axis for broadcasting
    return value[..., None, :, :]


def matmul(x: Jet, y: Jet) -> Jet:
    """Product of two matrix jets (Leibniz rule on Taylor coefficients and tangents)."""
    c0 = x.c0 @ y.c0
    c1 = x.c1 @ y.c0 + x.c0 @ y.c1
    c2 = x.c2 @ y.c0 + 2.0 * (x.c1 @ y.c1) + x.c0 @ y.c2
    if not x.has_tangents:
        return Jet(c0, c1, c2)
    d0 = x.d0 @ _ex(y.c0) + _ex(x.c0) @ y.d0
    d1 = (x.d1 @ _ex(y.c0) + _ex(x.c1) @ y.d0
          + x.d0 @ _ex(y.c1) + _ex(x.c0) @ y.d1)
    d2 = (x.d2 @ _ex(y.c0) + _ex(x.c2) @ y.d0
          + 2.0 * (x.d1 @ _ex(y.c1) + _ex(x.c1) @ y.d1)
          + x.d0 @ _ex(y.c2) + _ex(x.c0) @ y.d2)
    return Jet(c0, c1, c2, d0, d1, d2)
