"""Real-time-iteration solver for least-squares NMPC on the quadrotor model.

One call to :func:`rti_step` performs a single Gauss-Newton SQP iteration
on the multiple-shooting problem

    min  1/2 sum_k |W^1/2 r(x_k, u_k, ref_k)|^2 + 1/2 |W_N^1/2 r_N(x_N, ref_N)|^2
    s.t. x_{k+1} = f_d(x_k, u_k),  u_min <= u_k <= u_max,  x_0 = measured state

linearising around a warm start, condensing the state deviations away and
solving the resulting box-constrained QP in the control deviations with a
primal active-set method.

Residual functions are numba-compiled callables with signatures
``stage_fn(x, u, ref, prm) -> (ny,)`` and ``terminal_fn(x, ref, prm) -> (nt,)``.
They return *unweighted* residuals; weights are applied here.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numba as nb
import numpy as np

from .dynamics import NU, NX, VehicleParams, hover_control, rk4_kernel, rk4_sens_kernel
from .errors import InvalidParameterError, InvalidSpecError, NumericFault

FD_STEP = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    """Horizon, grid and input-box settings.

    Bounds follow ``|p|, |q|, |r| <= rate_limit_deg`` and
    ``thrust_min_factor * m g <= T <= thrust_max_factor * m g``.
    """

    horizon: int = 30
    stage_duration: float = 0.01
    rate_limit_deg: float = 100.0
    thrust_min_factor: float = 0.3
    thrust_max_factor: float = 2.0
    max_qp_iterations: int = 200
    qp_tolerance: float = 1e-9
    regularization: float = 1e-8

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidSpecError("horizon must be >= 1")
        if not self.stage_duration > 0:
            raise InvalidSpecError("stage_duration must be positive")
        if not self.rate_limit_deg > 0 or not 0 <= self.thrust_min_factor <= self.thrust_max_factor:
            raise InvalidSpecError("control bounds must satisfy lower <= upper")
        if self.max_qp_iterations < 1 or not self.qp_tolerance > 0:
            raise InvalidSpecError("QP iteration limit and tolerance must be positive")

    def bounds(self, vehicle: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
        rate = math.radians(self.rate_limit_deg)
        mg = vehicle.hover_thrust
        lower = np.array([-rate, -rate, -rate, self.thrust_min_factor * mg])
        upper = np.array([rate, rate, rate, self.thrust_max_factor * mg])
        return lower, upper


@dataclass(frozen=True)
class StageResidualSpec:
    """Least-squares objective description consumed by the solver.

    ``params`` is passed verbatim to both residual functions; ``ref_dim`` is
    the width of one row of per-stage reference data.
    """

    stage_fn: Callable
    terminal_fn: Callable
    stage_weights: np.ndarray
    terminal_weights: np.ndarray
    params: np.ndarray
    ref_dim: int

    def __post_init__(self):
        sw = np.ascontiguousarray(self.stage_weights, dtype=float)
        tw = np.ascontiguousarray(self.terminal_weights, dtype=float)
        if np.any(sw < 0) or np.any(tw < 0) or not (np.all(np.isfinite(sw)) and np.all(np.isfinite(tw))):
            raise InvalidSpecError("residual weights must be finite and non-negative")
        object.__setattr__(self, "stage_weights", sw)
        object.__setattr__(self, "terminal_weights", tw)
        object.__setattr__(self, "params", np.ascontiguousarray(self.params, dtype=float))

    def with_weights(self, stage_weights=None, terminal_weights=None) -> StageResidualSpec:
        return replace(
            self,
            stage_weights=self.stage_weights if stage_weights is None else stage_weights,
            terminal_weights=self.terminal_weights if terminal_weights is None else terminal_weights,
        )


@dataclass
class OcpSolution:
    states: np.ndarray  # (N + 1, 10)
    controls: np.ndarray  # (N, 4)
    objective: float = float("nan")
    qp_iterations: int = 0
    solve_time: float = 0.0
    degraded: bool = False

    @property
    def horizon(self) -> int:
        return len(self.controls)

    def copy(self) -> OcpSolution:
        return replace(self, states=self.states.copy(), controls=self.controls.copy())


# --------------------------------------------------------------------------
# compiled kernels


@nb.njit(cache=True)
def _stage_jacobian(stage_fn, x, u, ref, prm):
    r0 = stage_fn(x, u, ref, prm)
    ny = r0.size
    Jx = np.empty((ny, NX))
    Ju = np.empty((ny, NU))
    xp = x.copy()
    for i in range(NX):
        h = FD_STEP * max(1.0, abs(x[i]))
        xp[i] = x[i] + h
        hi = xp[i]
        rp = stage_fn(xp, u, ref, prm)
        xp[i] = x[i] - h
        lo = xp[i]
        rm = stage_fn(xp, u, ref, prm)
        xp[i] = x[i]
        Jx[:, i] = (rp - rm) / (hi - lo)
    up = u.copy()
    for i in range(NU):
        h = FD_STEP * max(1.0, abs(u[i]))
        up[i] = u[i] + h
        hi = up[i]
        rp = stage_fn(x, up, ref, prm)
        up[i] = u[i] - h
        lo = up[i]
        rm = stage_fn(x, up, ref, prm)
        up[i] = u[i]
        Ju[:, i] = (rp - rm) / (hi - lo)
    return r0, Jx, Ju


@nb.njit(cache=True)
def _terminal_jacobian(terminal_fn, x, ref, prm):
    r0 = terminal_fn(x, ref, prm)
    Jx = np.empty((r0.size, NX))
    xp = x.copy()
    for i in range(NX):
        h = FD_STEP * max(1.0, abs(x[i]))
        xp[i] = x[i] + h
        hi = xp[i]
        rp = terminal_fn(xp, ref, prm)
        xp[i] = x[i] - h
        lo = xp[i]
        rm = terminal_fn(xp, ref, prm)
        xp[i] = x[i]
        Jx[:, i] = (rp - rm) / (hi - lo)
    return r0, Jx


@nb.njit(cache=True)
def linearize_kernel(stage_fn, terminal_fn, xs, us, refs, prm, w_stage, w_term, mass, g, dt):
    """Dynamics sensitivities, shooting gaps and weighted residual Jacobians.

    Returns ``(A, B, gap, r, Jx, Ju, rN, JN)`` with ``gap_k = f(x_k, u_k) - x_{k+1}``.
    """
    N = us.shape[0]
    zero3 = np.zeros(3)
    sw = np.sqrt(w_stage)
    st = np.sqrt(w_term)
    ny = sw.size
    A = np.empty((N, NX, NX))
    B = np.empty((N, NX, NU))
    gap = np.empty((N, NX))
    r = np.empty((N, ny))
    Jx = np.empty((N, ny, NX))
    Ju = np.empty((N, ny, NU))
    for k in range(N):
        xn, Ak, Bk = rk4_sens_kernel(xs[k], us[k], zero3, mass, g, dt)
        A[k] = Ak
        B[k] = Bk
        gap[k] = xn - xs[k + 1]
        r0, jx, ju = _stage_jacobian(stage_fn, xs[k], us[k], refs[k], prm)
        for i in range(ny):
            r[k, i] = sw[i] * r0[i]
            Jx[k, i, :] = sw[i] * jx[i, :]
            Ju[k, i, :] = sw[i] * ju[i, :]
    rN, JN = _terminal_jacobian(terminal_fn, xs[N], refs[N], prm)
    for i in range(rN.size):
        rN[i] *= st[i]
        JN[i, :] *= st[i]
    return A, B, gap, r, Jx, Ju, rN, JN


@nb.njit(cache=True)
def condense_kernel(A, B, gap, r, Jx, Ju, rN, JN, e0):
    """Condense the linearised problem onto the control deviations.

    With ``dx_{k+1} = A_k dx_k + B_k du_k + gap_k`` and ``dx_0 = e0`` the
    Gauss-Newton model is ``0.5 du'H du + grad'du + const``. ``H`` (no
    regularisation) is assembled blockwise from a backward recursion on
    ``P_k = Q_k + A_k' P_{k+1} A_k`` in O(N^2) time.
    """
    N = A.shape[0]
    nv = N * NU
    # affine offsets of the state deviations for du = 0
    e = np.empty((N + 1, NX))
    e[0] = e0
    for k in range(N):
        e[k + 1] = A[k] @ e[k] + gap[k]
    const = 0.0
    m = np.empty_like(r)
    for k in range(N):
        m[k] = r[k] + Jx[k] @ e[k]
        const += 0.5 * np.dot(m[k], m[k])
    mN = rN + JN @ e[N]
    const += 0.5 * np.dot(mN, mN)

    H = np.zeros((nv, nv))
    grad = np.zeros(nv)
    K = np.empty((N, NU, NX))
    P = JN.T @ JN
    lam = JN.T @ mN
    for i in range(N - 1, -1, -1):
        Ai = np.ascontiguousarray(A[i])
        Bi = np.ascontiguousarray(B[i])
        Jxi = np.ascontiguousarray(Jx[i])
        Jui = np.ascontiguousarray(Ju[i])
        BtP = Bi.T @ P
        c = i * NU
        H[c:c + NU, c:c + NU] = Jui.T @ Jui + BtP @ Bi
        K[i] = Jui.T @ Jxi + BtP @ Ai
        grad[c:c + NU] = Jui.T @ m[i] + Bi.T @ lam
        lam = Jxi.T @ m[i] + Ai.T @ lam
        P = Jxi.T @ Jxi + Ai.T @ P @ Ai
    # off-diagonal blocks H_ij = K_i E_ij for i > j, where E_i = [E_i0 ... E_i,i-1]
    # maps earlier control deviations to dx_i and obeys E_{i+1} = [A_i E_i, B_i]
    E = np.zeros((NX, nv))
    E[:, :NU] = B[0]
    for i in range(1, N):
        c = i * NU
        Ei = np.ascontiguousarray(E[:, :c])
        blk = np.ascontiguousarray(K[i]) @ Ei
        H[c:c + NU, :c] = blk
        H[:c, c:c + NU] = blk.T
        if i < N - 1:
            E[:, :c] = np.ascontiguousarray(A[i]) @ Ei
            E[:, c:c + NU] = B[i]
    return H, grad, const, e


@nb.njit(cache=True)
def expand_kernel(A, B, gap, e0, du):
    """State deviations ``dx_k`` produced by control deviations ``du``."""
    N = A.shape[0]
    dx = np.empty((N + 1, NX))
    dx[0] = e0
    for k in range(N):
        dx[k + 1] = A[k] @ dx[k] + B[k] @ du[k * NU:(k + 1) * NU] + gap[k]
    return dx


@nb.njit(cache=True)
def objective_kernel(stage_fn, terminal_fn, x0, us, refs, prm, w_stage, w_term, mass, g, dt):
    zero3 = np.zeros(3)
    x = x0.copy()
    total = 0.0
    for k in range(us.shape[0]):
        res = stage_fn(x, us[k], refs[k], prm)
        total += 0.5 * np.dot(w_stage * res, res)
        x = rk4_kernel(x, us[k], zero3, mass, g, dt)
    res = terminal_fn(x, refs[us.shape[0]], prm)
    return total + 0.5 * np.dot(w_term * res, res)


@nb.njit(cache=True)
def _cholesky_solve(L, b):
    n = b.size
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for j in range(i):
            s -= L[i, j] * y[j]
        y[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for j in range(i + 1, n):
            s -= L[j, i] * x[j]
        x[i] = s / L[i, i]
    return x


@nb.njit(cache=True)
def box_qp_kernel(H, g, lo, hi, x0, max_iter, tol):
    """Primal active-set method for ``min 1/2 x'Hx + g'x, lo <= x <= hi``.

    ``H`` must be symmetric positive definite. Returns ``(x, iterations,
    converged)``; ``x`` is feasible even when not converged.
    """
    n = g.size
    x = x0.copy()
    # working set: -1 at lower bound, +1 at upper bound, 0 free
    ws = np.zeros(n, dtype=np.int8)
    for i in range(n):
        if x[i] <= lo[i]:
            x[i] = lo[i]
            ws[i] = -1
        elif x[i] >= hi[i]:
            x[i] = hi[i]
            ws[i] = 1
    gscale = 1.0
    for i in range(n):
        gscale = max(gscale, abs(g[i]))
    it = 0
    converged = False
    # after an unblocked full step x minimises over the current free set,
    # so the next iteration can go straight to the multiplier check
    at_min = False
    while it < max_iter:
        it += 1
        grad = H @ x + g
        nf = 0
        for i in range(n):
            if ws[i] == 0:
                nf += 1
        free = np.empty(nf, dtype=np.int64)
        j = 0
        for i in range(n):
            if ws[i] == 0:
                free[j] = i
                j += 1
        step = np.zeros(nf)
        small = True
        if nf > 0 and not at_min:
            Hff = np.empty((nf, nf))
            rhs = np.empty(nf)
            for a in range(nf):
                rhs[a] = -grad[free[a]]
                for b in range(nf):
                    Hff[a, b] = H[free[a], free[b]]
            L = np.linalg.cholesky(Hff)
            step = _cholesky_solve(L, rhs)
            xs = 1.0
            for a in range(nf):
                xs = max(xs, abs(x[free[a]]))
            for a in range(nf):
                if abs(step[a]) > tol * xs:
                    small = False
                    break
        if small:
            worst = -1
            worst_val = -tol * gscale
            for i in range(n):
                if ws[i] == -1:
                    lam = grad[i]
                elif ws[i] == 1:
                    lam = -grad[i]
                else:
                    continue
                if lam < worst_val:
                    worst_val = lam
                    worst = i
            if worst < 0:
                converged = True
                break
            ws[worst] = 0
            at_min = False
            continue
        alpha = 1.0
        block = -1
        for a in range(nf):
            i = free[a]
            if step[a] < 0.0:
                t = (lo[i] - x[i]) / step[a]
            elif step[a] > 0.0:
                t = (hi[i] - x[i]) / step[a]
            else:
                continue
            if t < alpha:
                alpha = t
                block = i
        for a in range(nf):
            x[free[a]] += alpha * step[a]
        at_min = block < 0
        if block >= 0:
            if x[block] - lo[block] < hi[block] - x[block]:
                x[block] = lo[block]
                ws[block] = -1
            else:
                x[block] = hi[block]
                ws[block] = 1
    for i in range(n):
        x[i] = min(max(x[i], lo[i]), hi[i])
    return x, it, converged


# --------------------------------------------------------------------------
# public API


def solve_box_qp(H, g, lower, upper, x0=None, max_iter=200, tol=1e-9):
    """Solve ``min 1/2 x'Hx + g'x`` subject to ``lower <= x <= upper``."""
    H = np.ascontiguousarray(H, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    lower = np.ascontiguousarray(lower, dtype=float)
    upper = np.ascontiguousarray(upper, dtype=float)
    if np.any(lower > upper):
        raise InvalidParameterError("QP bounds must satisfy lower <= upper")
    if x0 is None:
        x0 = np.clip(np.zeros_like(g), lower, upper)
    return box_qp_kernel(H, g, lower, upper, np.ascontiguousarray(x0, dtype=float), int(max_iter), float(tol))


def hover_solution(state, config: SolverConfig, vehicle: VehicleParams) -> OcpSolution:
    x = np.asarray(state, dtype=float)
    N = config.horizon
    return OcpSolution(np.tile(x, (N + 1, 1)), np.tile(hover_control(vehicle), (N, 1)))


def shift_warm_start(solution: OcpSolution) -> OcpSolution:
    """Shift states and controls one stage forward, duplicating the last stage."""
    xs = np.empty_like(solution.states)
    us = np.empty_like(solution.controls)
    xs[:-1] = solution.states[1:]
    xs[-1] = solution.states[-1]
    us[:-1] = solution.controls[1:]
    us[-1] = solution.controls[-1]
    return replace(solution, states=xs, controls=us)


def _check_inputs(measured_state, references, warm, residuals, config):
    x = np.ascontiguousarray(measured_state, dtype=float)
    if x.shape != (NX,):
        raise InvalidParameterError(f"measured state must have shape ({NX},)")
    refs = np.ascontiguousarray(references, dtype=float)
    N = config.horizon
    if refs.shape != (N + 1, residuals.ref_dim):
        raise InvalidParameterError(f"references must have shape ({N + 1}, {residuals.ref_dim}), got {refs.shape}")
    if warm.states.shape != (N + 1, NX) or warm.controls.shape != (N, NU):
        raise InvalidParameterError("warm start does not match the solver horizon")
    return x, refs


def _linearize(x, refs, xs, us, residuals, config, vehicle):
    return linearize_kernel(
        residuals.stage_fn, residuals.terminal_fn, xs, us, refs, residuals.params,
        residuals.stage_weights, residuals.terminal_weights,
        vehicle.mass, vehicle.gravity, config.stage_duration,
    )


def condense(measured_state, references, warm_start: OcpSolution, residuals: StageResidualSpec,
             config: SolverConfig = SolverConfig(), vehicle: VehicleParams = VehicleParams()):
    """Condensed Gauss-Newton QP data ``(H, grad, const)`` at ``warm_start``.

    ``H`` excludes the Levenberg term. ``0.5 du'H du + grad'du + const`` is the
    Gauss-Newton model of the objective in the control deviation ``du``.
    """
    x, refs = _check_inputs(measured_state, references, warm_start, residuals, config)
    xs = np.ascontiguousarray(warm_start.states, dtype=float)
    us = np.ascontiguousarray(warm_start.controls, dtype=float)
    A, B, gap, r, Jx, Ju, rN, JN = _linearize(x, refs, xs, us, residuals, config, vehicle)
    H, grad, const, _ = condense_kernel(A, B, gap, r, Jx, Ju, rN, JN, x - xs[0])
    return H, grad, const


def objective_value(measured_state, references, controls, residuals: StageResidualSpec,
                    config: SolverConfig = SolverConfig(), vehicle: VehicleParams = VehicleParams()) -> float:
    """Nonlinear objective of a control sequence simulated from ``measured_state``."""
    x = np.ascontiguousarray(measured_state, dtype=float)
    refs = np.ascontiguousarray(references, dtype=float)
    us = np.ascontiguousarray(controls, dtype=float)
    return float(objective_kernel(
        residuals.stage_fn, residuals.terminal_fn, x, us, refs, residuals.params,
        residuals.stage_weights, residuals.terminal_weights,
        vehicle.mass, vehicle.gravity, config.stage_duration,
    ))


def rti_step(measured_state, references, warm_start: OcpSolution | None, residuals: StageResidualSpec,
             config: SolverConfig = SolverConfig(), vehicle: VehicleParams = VehicleParams()):
    """One real-time iteration. Returns ``(first control, updated solution)``.

    ``warm_start`` of ``None`` starts from hover at the measured state.
    When the QP does not converge within ``config.max_qp_iterations`` the
    best (feasible) iterate is used and the solution is flagged ``degraded``.
    The reported objective is the Gauss-Newton model value after the step.
    """
    started = time.perf_counter()
    if warm_start is None:
        warm_start = hover_solution(measured_state, config, vehicle)
    lower, upper = config.bounds(vehicle)
    warm = replace(warm_start, controls=np.clip(warm_start.controls, lower, upper))
    x, refs = _check_inputs(measured_state, references, warm, residuals, config)
    xs = np.ascontiguousarray(warm.states, dtype=float)
    us = np.ascontiguousarray(warm.controls, dtype=float)

    A, B, gap, r, Jx, Ju, rN, JN = _linearize(x, refs, xs, us, residuals, config, vehicle)
    e0 = x - xs[0]
    H, grad, const, _ = condense_kernel(A, B, gap, r, Jx, Ju, rN, JN, e0)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(grad))):
        raise NumericFault("non-finite linearisation in RTI step")
    N = config.horizon
    lo = np.tile(lower, N) - us.ravel()
    hi = np.tile(upper, N) - us.ravel()
    Hr = H + config.regularization * np.eye(H.shape[0])
    du, iters, converged = box_qp_kernel(
        Hr, grad, lo, hi, np.zeros_like(grad), config.max_qp_iterations, config.qp_tolerance
    )
    new_us = np.clip(us + du.reshape(N, NU), lower, upper)
    new_xs = xs + expand_kernel(A, B, gap, e0, du)
    objective = float(0.5 * du @ (H @ du) + grad @ du + const)
    solution = OcpSolution(
        states=new_xs,
        controls=new_us,
        objective=objective,
        qp_iterations=int(iters),
        solve_time=time.perf_counter() - started,
        degraded=not converged,
    )
    return new_us[0].copy(), solution


class RtiSolver:
    """Stateful RTI controller core holding the warm start between calls.

    Not safe for concurrent use; create one instance per control loop.
    """

    def __init__(self, residuals: StageResidualSpec, config: SolverConfig = SolverConfig(),
                 vehicle: VehicleParams = VehicleParams()):
        self.residuals = residuals
        self.config = config
        self.vehicle = vehicle
        self.solution: OcpSolution | None = None

    def reset(self) -> None:
        self.solution = None

    def step(self, measured_state, references):
        warm = None if self.solution is None else shift_warm_start(self.solution)
        u, self.solution = rti_step(measured_state, references, warm, self.residuals, self.config, self.vehicle)
        return u, self.solution
