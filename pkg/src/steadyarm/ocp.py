"""Receding-horizon optimal control problem: assembly and SQP solution.

Decision variables follow the multiple-shooting layout [x_1..x_N, u_0..u_{N-1}]
with x_0 a fixed parameter. Because the dynamics are linear, the states are
eliminated exactly (condensing): X = Phi x_0 + Gamma U, so every candidate
returned by the solver satisfies the dynamics equalities to machine precision
and the reduced problem is solved over U alone.

Each SQP iteration builds the Gauss-Newton model of the squared-residual
objective (the cost is an exact sum of squares), adds augmented-Lagrangian
terms for the sphere-collision inequalities, and solves a dense QP with the
box bounds on u and on the (affine) states as hard linear rows. A backtracking
Armijo line search on the exact-penalty merit keeps iterates feasible; the
best feasible iterate is tracked so an iteration cap still returns a usable
plan. One kinematic-chain jet pass per candidate point feeds the cost
residuals and the collision margins together. Everything is plain
deterministic numpy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import ArmConfig, ParamSet, SolverSettings
from .constraints import CollisionModel, CollisionPairSet, Limits, build_pairs
from .cost import CostModel, Weights
from .kinematics import ArmKinematics, DhTable, SphereSpec
from .model import DiscreteModel, discretize
from .qp import solve_qp
from .reference import ReferenceTrajectory

# augmented-Lagrangian schedule for collision margins
_MU_INIT = 1e5
_MU_SCALE = 10.0
_MU_MAX = 1e12
_MAX_OUTER = 10
_INNER_CAP = 12  # per-outer budget so multiplier updates are not starved
# L1 penalty weight for state-bound slacks on infeasible starts
_RHO_SLACK = 1e6
_RESTORE_CAP = 8  # Gauss-Newton iterations of pure feasibility restoration


@dataclass
class OcpProblem:
    model: DiscreteModel
    weights: Weights
    limits: Limits
    spheres: list[SphereSpec]
    pairs: CollisionPairSet
    N: int
    dt: float
    dh: DhTable
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon N must be >= 1")
        n, nx = self.model.n_u, self.model.n_x
        self.kin = ArmKinematics(self.dh)
        self.cost_model = CostModel(self.kin, self.weights, self.dt)
        self.collision = CollisionModel(self.kin, self.spheres, self.pairs)
        N = self.N
        # condensing: X_stack = Phi x0 + Gamma U_flat
        Apow = [np.eye(nx)]
        for _ in range(N):
            Apow.append(self.model.A @ Apow[-1])
        self.Phi = np.vstack([Apow[k] for k in range(1, N + 1)])          # (N nx, nx)
        self.Gamma = np.zeros((N * nx, N * n))
        for k in range(1, N + 1):
            for j in range(k):
                self.Gamma[(k - 1) * nx:k * nx, j * n:(j + 1) * n] = Apow[k - 1 - j] @ self.model.B
        self.Gamma3 = np.ascontiguousarray(self.Gamma.reshape(N, nx, N * n))
        # constant box rows: [I; -I] for u, [Gamma; -Gamma] for states
        eye = np.eye(N * n)
        self.A_box = np.vstack([eye, -eye, self.Gamma, -self.Gamma])
        width = np.tile(self.limits.u_max - self.limits.u_min, N)
        self._row_gate = np.abs(self.A_box) @ width  # max possible row change

    @property
    def n_q(self) -> int:
        return self.model.n_u

    @property
    def n_decision(self) -> int:
        """Size of the multiple-shooting decision vector [x_1..x_N, u_0..u_{N-1}]."""
        return self.N * (self.model.n_x + self.model.n_u)

    def rollout(self, x0: np.ndarray, U: np.ndarray) -> np.ndarray:
        """States x_0..x_N (N+1, nx) under controls U, dynamics exact."""
        return np.vstack([x0[None, :], self.model.rollout(x0, U)])

    def box_rhs(self, x0: np.ndarray, U: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Right-hand side b of A_box (U + dU) <= ... in delta-U form."""
        N = self.N
        u_flat = U.ravel()
        xs = X[1:].ravel()
        return np.concatenate([
            np.tile(self.limits.u_max, N) - u_flat,
            u_flat - np.tile(self.limits.u_min, N),
            np.tile(self.limits.x_max, N) - xs,
            xs - np.tile(self.limits.x_min, N),
        ])


def build(arm: ArmConfig, params: ParamSet) -> OcpProblem:
    """Assemble the OCP from an arm description and a parameter set."""
    model = discretize(arm.dh.n_q, params.dt)
    return OcpProblem(
        model=model, weights=params.weights, limits=arm.limits,
        spheres=arm.spheres, pairs=build_pairs(arm.spheres),
        N=params.N, dt=params.dt, dh=arm.dh, settings=params.solver,
    )


@dataclass
class SolveResult:
    X: np.ndarray                 # (N+1, nx) states including x0
    U: np.ndarray                 # (N, n) controls
    objective: float
    iterations: int
    wall_time: float
    kkt_residual: float
    max_constraint_violation: float
    status: str                   # converged | max-iter | infeasible-start-recovered
    x0_clamped: bool = False
    dynamics_residual: float = 0.0


@dataclass
class WarmStart:
    result: SolveResult
    t0: float


def _snap_to_node(s: float) -> float:
    """Round a node-index fraction onto the nearest integer when the gap is
    float noise, so an exactly one-period shift indexes exactly one node."""
    k = round(s)
    if abs(s - k) < 1e-9 * max(1.0, abs(s)):
        return float(k)
    return s


def shift_warm_start(warm: WarmStart, elapsed: float, prob: OcpProblem):
    """Time-shift the previous solution to serve as (x0 estimate, X guess, U guess).

    The previous state trajectory is interpolated at `elapsed`; the guess is the
    previous solution shifted by the same amount with the tail padded by holding
    the last state and zero control. `elapsed` outside [0, N dt] degrades to a
    cold start at the final predicted configuration.
    """
    X, U = warm.result.X, warm.result.U
    N, n, dt = prob.N, prob.n_q, prob.dt
    if elapsed < 0.0 or elapsed > N * dt:
        q_end = X[-1, :n]
        x0 = np.concatenate([q_end, np.zeros(n)])
        return x0, np.tile(x0, (N + 1, 1)), np.zeros((N, n))
    s = _snap_to_node(elapsed / dt)

    def interp(t: float) -> np.ndarray:
        t = min(t, float(N))
        i = min(int(np.floor(t)), N - 1)
        f = t - i
        return (1.0 - f) * X[i] + f * X[i + 1]

    x0 = interp(s)
    X_guess = np.vstack([interp(s + k) for k in range(N + 1)])
    U_guess = np.zeros((N, n))
    for k in range(N):
        j = int(np.floor(s + k))
        if j < N:
            U_guess[k] = U[j]
    return x0, X_guess, U_guess


class _Point:
    """One candidate U with everything the merit/bookkeeping needs, evaluated
    from a single kinematic-chain pass."""

    __slots__ = ("U", "X", "cost", "m", "sviol", "viol")

    def __init__(self, U, X, cost, m, sviol):
        self.U = U
        self.X = X
        self.cost = cost
        self.m = m
        self.sviol = sviol
        self.viol = max(0.0, -float(m.min(initial=0.0)), sviol)


def solve(prob: OcpProblem, x0: np.ndarray, ref: ReferenceTrajectory,
          warm: "WarmStart | tuple[np.ndarray, np.ndarray] | None" = None) -> SolveResult:
    """SQP solve of the horizon problem from x0 tracking ref.

    `warm` seeds the initial guess: either a WarmStart (whose solution is used
    as-is; time-shift it first with shift_warm_start) or a pre-shifted (X, U)
    tuple. States are re-rolled from U so the dynamics hold exactly.
    """
    t_start = time.perf_counter()
    x0 = np.asarray(x0, float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 contains non-finite entries")
    if not (np.all(np.isfinite(ref.positions)) and np.all(np.isfinite(ref.rotations))):
        raise ValueError("reference contains non-finite entries")
    if ref.horizon != prob.N:
        raise ValueError(f"reference horizon {ref.horizon} != problem horizon {prob.N}")
    N, n = prob.N, prob.n_q
    nx = 2 * n
    lim = prob.limits
    kin = prob.kin
    settings = prob.settings
    has_coll = prob.collision.n_pairs > 0

    x0c = lim.clamp_state(x0)
    x0_clamped = bool(np.abs(x0c - x0).max() > 0.0)
    x0 = x0c

    if warm is None:
        U = np.zeros((N, n))
    else:
        U_raw = warm.result.U if isinstance(warm, WarmStart) else warm[1]
        U = np.clip(np.asarray(U_raw, float), lim.u_min, lim.u_max)

    lam_al = np.zeros((N, prob.collision.n_pairs))
    mu = _MU_INIT
    recovered = False
    total_iters = 0
    kkt = np.inf

    def state_viol(X_):
        # deadband at the QP primal tolerance so solver-level noise does not
        # register as a violation in the exact-penalty merit
        xs = X_[1:]
        over = (np.maximum(0.0, xs - lim.x_max - 1e-9)
                + np.maximum(0.0, lim.x_min - xs - 1e-9))
        return float(over.sum())

    def eval_point(U_) -> _Point:
        X_ = prob.rollout(x0, U_)
        frames = kin.chain_jets(X_[1:, :n], X_[1:, n:], U_)
        r_ = prob.cost_model.residuals(X_, U_, ref, frames=frames)
        m_ = (prob.collision.margins(frames=frames) if has_coll
              else np.zeros((N, 0)))
        return _Point(U_, X_, float(np.sum(r_ * r_)), m_, state_viol(X_))

    def psi_sum(m_):
        if m_.size == 0:
            return 0.0
        act = np.maximum(0.0, lam_al - mu * m_)
        return float(np.sum(act * act - lam_al * lam_al) / (2.0 * mu))

    def merit_of(pt: _Point) -> float:
        return pt.cost + psi_sum(pt.m) + _RHO_SLACK * pt.sviol

    # track the best iterate seen (feasible ones preferred, then by objective;
    # infeasible ones compete on violation first)
    best = None

    def consider(pt: _Point, kkt_):
        nonlocal best
        infeas = pt.viol > settings.tol_feasibility
        key = (infeas, pt.viol if infeas else 0.0, pt.cost)
        if best is None or key < best[0]:
            best = (key, pt, kkt_)

    cur = eval_point(U)
    consider(cur, np.inf)

    m_cost = prob.cost_model.m
    for _outer in range(_MAX_OUTER):
        # ---------------- inner SQP on the AL subproblem ----------------
        inner_iters = 0
        while total_iters < settings.max_iters and inner_iters < _INNER_CAP:
            total_iters += 1
            inner_iters += 1
            X, U = cur.X, cur.U
            frames_s = kin.chain_jets(X[1:, :n], X[1:, n:], U, n_seeds=3 * n)
            r, J_loc = prob.cost_model.residuals(X, U, ref, with_jacobian=True,
                                                 frames=frames_s)
            # chain local (q, qd, u) jacobians through the condensing map
            Jb = J_loc[:, :, :nx] @ prob.Gamma3
            for k in range(N):
                Jb[k, :, k * n:(k + 1) * n] += J_loc[k, :, nx:]
            J = Jb.reshape(N * m_cost, N * n)
            g = 2.0 * (J.T @ r.ravel())
            H = 2.0 * (J.T @ J)

            if has_coll:
                m_val, Jm = prob.collision.margins_and_jacobian(frames=frames_s)
                force = np.maximum(0.0, lam_al - mu * m_val)   # (N, P)
                act = force > 0.0
                if act.any():
                    sq = np.sqrt(mu / 2.0)
                    for k in range(1, N + 1):
                        rows = np.nonzero(act[k - 1])[0]
                        if len(rows) == 0:
                            continue
                        Gq = prob.Gamma[(k - 1) * nx:(k - 1) * nx + n, :]
                        J_al = -sq * (Jm[k - 1, rows] @ Gq)     # (rows, Nn)
                        r_al = force[k - 1, rows] / np.sqrt(2.0 * mu)
                        g += 2.0 * (J_al.T @ r_al)
                        H += 2.0 * (J_al.T @ J_al)

            H[np.diag_indices_from(H)] += 1e-8 * max(1.0, float(np.abs(H).max()))

            # hard linear rows: u box always, state box rows that could matter
            b = prob.box_rhs(x0, U, X)
            keep = b <= prob._row_gate
            A_k = prob.A_box[keep]
            b_k = b[keep]
            viol_rows = b_k < 0.0
            n_slack = int(viol_rows.sum())
            if n_slack:
                recovered = True
                nv = len(g)
                A_ext = np.zeros((len(b_k) + n_slack, nv + n_slack))
                A_ext[:len(b_k), :nv] = A_k
                A_ext[:len(b_k), nv:][viol_rows, np.arange(n_slack)] = -1.0
                A_ext[len(b_k):, nv:] = -np.eye(n_slack)
                b_ext = np.concatenate([b_k, np.zeros(n_slack)])
                H_ext = np.zeros((nv + n_slack, nv + n_slack))
                H_ext[:nv, :nv] = H
                H_ext[nv:, nv:] = 1e-2 * np.eye(n_slack)
                g_ext = np.concatenate([g, _RHO_SLACK * np.ones(n_slack)])
                qres = solve_qp(H_ext, g_ext, A_ext, b_ext)
                dU = qres.z[:nv]
                duals = qres.duals[:len(b_k)]
            else:
                qres = solve_qp(H, g, A_k, b_k)
                dU = qres.z
                duals = qres.duals

            kkt = float(np.abs(g + A_k.T @ duals).max())
            if kkt <= settings.tol_stationarity:
                # subproblem stationary: done if feasible, else let the outer
                # loop update the multipliers instead of churning here
                consider(cur, kkt)
                break
            if np.abs(dU).max() < 1e-12:
                break

            # Armijo backtracking on the merit function
            phi0 = merit_of(cur)
            descent = float(g @ dU)
            if n_slack:
                descent -= _RHO_SLACK * max(0.0, cur.sviol - float(qres.z[nv:].sum()))
            alpha = 1.0
            accepted = False
            trial = None
            for _ in range(25):
                trial = eval_point(U + alpha * dU.reshape(N, n))
                if merit_of(trial) <= phi0 + 1e-4 * alpha * descent:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            cur = trial
            consider(cur, kkt)
            if kkt <= settings.tol_stationarity and np.abs(alpha * dU).max() < 1e-10:
                break
        # ---------------- AL multiplier / penalty update ----------------
        marg_viol = max(0.0, -float(cur.m.min(initial=0.0)))
        if (kkt <= settings.tol_stationarity and cur.viol <= settings.tol_feasibility) \
                or total_iters >= settings.max_iters or not has_coll:
            break
        lam_al = np.maximum(0.0, lam_al - mu * cur.m)
        if marg_viol > settings.tol_feasibility:
            mu = min(mu * _MU_SCALE, _MU_MAX)

    # ---------------- feasibility restoration ----------------
    # If the best iterate is still infeasible, polish the violation alone:
    # Gauss-Newton on the violated margin / state-box rows with the u box kept
    # hard by clipping. A feasible plan, even cost-suboptimal, is what the
    # receding-horizon loop needs to keep a valid command defined.
    _, pt_best, _ = best
    if pt_best.viol > settings.tol_feasibility:
        rp = pt_best
        for _ in range(_RESTORE_CAP):
            if rp.viol <= 0.5 * settings.tol_feasibility:
                break
            total_iters += 1
            res_rows, jac_rows = [], []
            if has_coll:
                m_val, Jm = prob.collision.margins_and_jacobian(rp.X[1:, :n])
                for k in range(1, N + 1):
                    bad = np.nonzero(m_val[k - 1] < 1e-9)[0]
                    if len(bad):
                        Gq = prob.Gamma[(k - 1) * nx:(k - 1) * nx + n, :]
                        res_rows.append(-m_val[k - 1, bad])
                        jac_rows.append(-(Jm[k - 1, bad] @ Gq))
            xs = rp.X[1:]
            over_hi = xs - lim.x_max
            over_lo = lim.x_min - xs
            for k in range(1, N + 1):
                Gk = prob.Gamma[(k - 1) * nx:k * nx, :]
                hi = np.nonzero(over_hi[k - 1] > 1e-10)[0]
                if len(hi):
                    res_rows.append(over_hi[k - 1, hi])
                    jac_rows.append(Gk[hi])
                lo = np.nonzero(over_lo[k - 1] > 1e-10)[0]
                if len(lo):
                    res_rows.append(over_lo[k - 1, lo])
                    jac_rows.append(-Gk[lo])
            if not res_rows:
                break
            rv = np.concatenate(res_rows)
            Jv = np.vstack(jac_rows)
            Hr = Jv.T @ Jv
            Hr[np.diag_indices_from(Hr)] += 1e-9 * max(1.0, float(np.abs(Hr).max()))
            d = np.linalg.solve(Hr, -(Jv.T @ rv))
            alpha, improved = 1.0, False
            for _ in range(12):
                Ut = np.clip(rp.U + alpha * d.reshape(N, n),
                             lim.u_min, lim.u_max)
                ptt = eval_point(Ut)
                if ptt.viol < rp.viol:
                    rp, improved = ptt, True
                    break
                alpha *= 0.5
            if not improved:
                break
        consider(rp, kkt)

    _, pt_best, kkt_best = best
    dyn = _dynamics_residual(prob.model, pt_best.X, pt_best.U)
    if kkt <= settings.tol_stationarity and pt_best.viol <= settings.tol_feasibility:
        status = "infeasible-start-recovered" if recovered else "converged"
    else:
        status = "max-iter"
    return SolveResult(
        X=pt_best.X.copy(), U=pt_best.U.copy(), objective=pt_best.cost,
        iterations=total_iters, wall_time=time.perf_counter() - t_start,
        kkt_residual=float(kkt),
        max_constraint_violation=float(max(pt_best.viol, dyn)),
        status=status, x0_clamped=x0_clamped, dynamics_residual=float(dyn),
    )


def _dynamics_residual(model: DiscreteModel, X: np.ndarray, U: np.ndarray) -> float:
    pred = (model.A @ X[:-1].T).T + (model.B @ U.T).T
    return float(np.abs(X[1:] - pred).max(initial=0.0))


def lagrangian_gradient(prob: OcpProblem, x0, U, ref, lam_al, mu) -> np.ndarray:
    """Gradient of J_d + AL collision terms w.r.t. U (for verification)."""
    x0 = np.asarray(x0, float)
    U = np.asarray(U, float)
    N, n = prob.N, prob.n_q
    nx = 2 * n
    X = prob.rollout(x0, U)
    r, J_loc = prob.cost_model.residuals(X, U, ref, with_jacobian=True)
    g = np.zeros(N * n)
    for k in range(1, N + 1):
        Gk = prob.Gamma[(k - 1) * nx:k * nx, :]
        blk = J_loc[k - 1, :, :nx] @ Gk
        blk[:, (k - 1) * n:k * n] += J_loc[k - 1, :, nx:]
        g += 2.0 * (blk.T @ r[k - 1])
    if prob.collision.n_pairs:
        m_val, Jm = prob.collision.margins_and_jacobian(X[1:, :n])
        force = np.maximum(0.0, lam_al - mu * m_val)
        for k in range(1, N + 1):
            rows = np.nonzero(force[k - 1] > 0)[0]
            if len(rows) == 0:
                continue
            Gq = prob.Gamma[(k - 1) * nx:(k - 1) * nx + n, :]
            g += -(force[k - 1, rows] @ (Jm[k - 1, rows] @ Gq))
    return g
