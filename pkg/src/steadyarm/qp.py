"""Dense convex-QP solver: Mehrotra predictor-corrector interior point.

Solves   min_z  1/2 z'Hz + g'z   s.t.  A z <= b

with H symmetric positive definite (the caller adds damping). Written for the
small, dense subproblems of the trajectory SQP loop (tens of variables, a few
hundred rows), where a fixed-pipeline dense method beats sparse machinery and
is bitwise deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QpError(RuntimeError):
    """Numerical failure inside the QP solve (singular system, NaN inputs)."""


@dataclass
class QpResult:
    z: np.ndarray          # primal solution
    duals: np.ndarray      # Lagrange multipliers for Az <= b, >= 0
    iterations: int
    primal_residual: float  # max(0, Az - b) infinity norm
    dual_residual: float    # ||Hz + g + A'lam||_inf
    gap: float              # complementarity s'lam / m
    converged: bool


def solve_qp(H: np.ndarray, g: np.ndarray, A: np.ndarray | None = None,
             b: np.ndarray | None = None, tol: float = 1e-9,
             max_iters: int = 50) -> QpResult:
    """Minimize 1/2 z'Hz + g'z subject to A z <= b (A may be empty or None)."""
    H = np.asarray(H, float)
    g = np.asarray(g, float)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise QpError("non-finite QP data")
    n = len(g)
    if A is None or len(A) == 0:
        z = _solve_sym(H, -g)
        return QpResult(z=z, duals=np.zeros(0), iterations=0,
                        primal_residual=0.0,
                        dual_residual=float(np.abs(H @ z + g).max(initial=0.0)),
                        gap=0.0, converged=True)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m = len(b)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise QpError("non-finite QP constraint data")

    # strictly interior start
    z = np.zeros(n)
    s = np.maximum(b - A @ z, 1.0)
    lam = np.ones(m)

    best: QpResult | None = None
    for it in range(1, max_iters + 1):
        r_d = H @ z + g + A.T @ lam
        r_p = A @ z + s - b
        mu = float(s @ lam) / m

        res = QpResult(
            z=z.copy(), duals=lam.copy(), iterations=it - 1,
            primal_residual=float(np.maximum(A @ z - b, 0.0).max(initial=0.0)),
            dual_residual=float(np.abs(r_d).max(initial=0.0)),
            gap=mu, converged=False)
        if best is None or (res.primal_residual + res.dual_residual + res.gap
                            < best.primal_residual + best.dual_residual + best.gap):
            best = res
        if res.primal_residual < tol and res.dual_residual < tol and mu < tol:
            res.converged = True
            return res

        d = lam / s
        M = H + (A.T * d) @ A
        # affine predictor (r_c = S lam, sigma = 0)
        rhs_aff = -r_d + A.T @ (lam - d * r_p)
        dz_aff = _solve_sym(M, rhs_aff)
        ds_aff = -r_p - A @ dz_aff
        dlam_aff = -lam - d * ds_aff
        a_p = _max_step(s, ds_aff)
        a_d = _max_step(lam, dlam_aff)
        mu_aff = float((s + a_p * ds_aff) @ (lam + a_d * dlam_aff)) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # corrector
        r_c = s * lam - sigma * mu + ds_aff * dlam_aff
        rhs = -r_d + A.T @ (r_c / s - d * r_p)
        dz = _solve_sym(M, rhs)
        ds = -r_p - A @ dz
        dlam = -(r_c / s) - d * ds

        eta = 0.99
        alpha = min(1.0, eta * _max_step(s, ds), eta * _max_step(lam, dlam))
        z = z + alpha * dz
        s = s + alpha * ds
        lam = lam + alpha * dlam
        if not (np.all(np.isfinite(z)) and np.all(s > 0) and np.all(lam > 0)):
            raise QpError("interior-point iterate left the cone")

    return best


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha in (0, 1] with v + alpha dv > 0."""
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _solve_sym(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        c, low = _cho(M)
        return _cho_solve(c, rhs)
    except np.linalg.LinAlgError:
        # light Tikhonov rescue keeps the pipeline deterministic
        bump = 1e-12 * max(1.0, float(np.abs(M).max()))
        for _ in range(8):
            try:
                c, _ = _cho(M + bump * np.eye(len(M)))
                return _cho_solve(c, rhs)
            except np.linalg.LinAlgError:
                bump *= 100.0
        raise QpError("KKT system not positive definite")


def _cho(M):
    return np.linalg.cholesky(M), True


def _cho_solve(L, rhs):
    y = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, y)
