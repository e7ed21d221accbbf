"""Receding-horizon ergodic controller.

Each control period the planner warm-starts from the previous plan shifted
in time, then runs projected gradient descent with Armijo backtracking on

    J = q * eps(c(traj), phi) + int 0.5 u' R u dt + barrier terms,

where the trajectory coefficients c average over the entire realized run
plus the lookahead horizon (full-history memory), so the controller targets
whole-run statistics. Gradients are the exact discrete adjoint of the
RK4-integrated objective: the costate is propagated backward through the
integrator stages with the per-sample coefficient forcing, and the descent
direction is -(R u + h(x)' costate).

Inside the planner, periodic coordinates are left unwrapped: the cosine
basis extends smoothly across the box edge (even reflection), which keeps
the objective differentiable when a predicted swing crosses the seam.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import ControlAffineSystem, IntegrationDivergedError, step_rk4
from .spectral import basis_gradient, basis_matrix, frequency_weights
from .task_learning import TaskDefinition


@dataclass(frozen=True)
class MpcConfig:
    q: float = 20.0
    r_diag: tuple = (0.01,)
    order: int = 10
    horizon: float = 1.5
    control_period: float = 0.1
    max_iters: int = 15
    alpha0: float = 1.0
    shrink: float = 0.5
    slope_tol: float = 1e-4
    converge_tol: float = 1e-6
    max_backtracks: int = 25
    memory: str = "full_history"
    barrier_weight: float = 100.0
    plan_dt: float = 0.05
    sim_dt: float = 0.002
    record_dt: float = 0.02

    def __post_init__(self):
        if self.q <= 0.0:
            raise ValueError("ergodic cost weight q must be positive")
        if any(r <= 0.0 for r in self.r_diag):
            raise ValueError("control weight diagonal must be positive")
        if not (0.0 < self.control_period <= self.horizon):
            raise ValueError("need 0 < control_period <= horizon")
        if self.memory not in ("full_history", "horizon_only"):
            raise ValueError("memory must be 'full_history' or 'horizon_only'")
        for name, num, den in (
            ("horizon/plan_dt", self.horizon, self.plan_dt),
            ("control_period/plan_dt", self.control_period, self.plan_dt),
            ("plan_dt/sim_dt", self.plan_dt, self.sim_dt),
            ("record_dt/sim_dt", self.record_dt, self.sim_dt),
        ):
            ratio = num / den
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"{name} must be an integer ratio, got {ratio}")

    def r_matrix(self, control_dim: int) -> np.ndarray:
        diag = np.asarray(self.r_diag, dtype=float)
        if diag.size == 1 and control_dim > 1:
            diag = np.full(control_dim, diag[0])
        if diag.size != control_dim:
            raise ValueError(f"R diagonal has {diag.size} entries, control dim {control_dim}")
        return np.diag(diag)

    def with_overrides(self, **kw) -> "MpcConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass
class PlanDiagnostics:
    t: float
    eps_before: float
    eps_after: float
    j_before: float
    j_after: float
    iterations: int
    line_search_evals: int
    exhausted: bool
    j_history: list = field(default_factory=list)


@dataclass
class RolloutResult:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    eps_running: np.ndarray
    replans: list
    final_eps: float
    cancelled: bool = False
    diverged: bool = False
    meta: dict = field(default_factory=dict)


class PlanDivergedError(RuntimeError):
    pass


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    w[1:] += 0.5 * np.diff(times)
    w[:-1] += 0.5 * np.diff(times)
    return w


class _TaskWorkspace:
    """Precomputed task quantities shared by objective and gradient evaluation."""

    def __init__(self, system: ControlAffineSystem, task: TaskDefinition, cfg: MpcConfig):
        if task.phi.order != cfg.order:
            raise ValueError(
                f"task coefficients are order {task.phi.order}, config expects {cfg.order}"
            )
        if len(task.projection) != task.domain.n:
            raise ValueError("task projection size must match its domain dimension")
        self.system = system
        self.task = task
        self.cfg = cfg
        self.proj = list(task.projection)
        self.weights = frequency_weights(cfg.order, task.domain.n).values
        self.phi = task.phi.values
        self.r_mat = cfg.r_matrix(system.control_dim)
        periodic = system.projected_periodic()
        self.barrier_dims = [i for i, per in enumerate(periodic) if not per]
        self.barrier_lower = task.domain.lower[self.barrier_dims]
        self.barrier_upper = task.domain.upper[self.barrier_dims]
        # linear dynamics admit an exact one-step RK4 transition pair
        self.lin_step = _rk4_linear_step(system, cfg.plan_dt) if system.constant_jacobians else None

    def coefficients(self, states, quad_weights, hist_integral, t_hist, duration):
        pts = states[:, self.proj]
        fmat = basis_matrix(pts, self.cfg.order, self.task.domain)
        integral = quad_weights @ fmat
        if self.cfg.memory == "full_history" and hist_integral is not None:
            integral = integral + hist_integral
            total_time = t_hist + duration
        else:
            total_time = duration
        return integral / total_time, fmat, total_time

    def barrier_terms(self, states):
        vals = np.zeros(states.shape[0])
        grads = np.zeros((states.shape[0], len(self.barrier_dims)))
        if not self.barrier_dims:
            return vals, grads
        cols = [self.proj[i] for i in self.barrier_dims]
        x = states[:, cols]
        over = np.maximum(x - self.barrier_upper, 0.0)
        under = np.maximum(self.barrier_lower - x, 0.0)
        vals = np.sum(over**2 + under**2, axis=1)
        grads = 2.0 * over - 2.0 * under
        return vals, grads

    def objective_terms(self, times, states, controls, hist_integral=None, t_hist=0.0):
        """Returns (J, eps, per-sample coefficient context for the gradient)."""
        times = np.asarray(times, dtype=float)
        states = np.atleast_2d(np.asarray(states, dtype=float))
        controls = np.atleast_2d(np.asarray(controls, dtype=float))
        duration = times[-1] - times[0]
        quad = _trapezoid_weights(times)
        coeffs, fmat, total_time = self.coefficients(
            states, quad, hist_integral, t_hist, duration
        )
        diff = coeffs - self.phi
        eps = float(np.dot(self.weights, diff * diff))
        dts = np.diff(times)
        ctrl = 0.5 * float(np.sum((controls @ self.r_mat) * controls * dts[:, None]))
        bvals, _ = self.barrier_terms(states)
        barrier = self.cfg.barrier_weight * float(np.dot(quad, bvals))
        j = self.cfg.q * eps + ctrl + barrier
        return j, eps, (diff, quad, total_time)


def objective(times, states, controls, task: TaskDefinition, cfg: MpcConfig,
              system: ControlAffineSystem, hist_integral=None, t_hist: float = 0.0):
    """Closed-loop objective of a sampled trajectory; returns (J, eps)."""
    ws = _TaskWorkspace(system, task, cfg)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    times = np.asarray(times, dtype=float)
    if controls.shape[0] == times.size:
        controls = controls[:-1]
    if controls.shape[0] != times.size - 1:
        raise ValueError("need one control row per trajectory interval")
    j, eps, _ = ws.objective_terms(times, states, controls, hist_integral, t_hist)
    return j, eps


def _rk4_linear_step(system: ControlAffineSystem, dt: float):
    """One-step RK4 transition matrices (A_d, B_d) for constant-Jacobian dynamics.

    These reproduce the generic RK4 map exactly, so the fast path is
    bit-compatible with the staged integrator on linear systems.
    """
    x_ref = system.rest_state
    u_ref = np.zeros(system.control_dim)
    a = system.jac_x(x_ref, u_ref)
    b = system.jac_u(x_ref, u_ref)
    eye = np.eye(system.state_dim)
    d1 = a
    d2 = a @ (eye + 0.5 * dt * d1)
    d3 = a @ (eye + 0.5 * dt * d2)
    d4 = a @ (eye + dt * d3)
    a_d = eye + (dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
    e1 = b
    e2 = a @ (0.5 * dt * e1) + b
    e3 = a @ (0.5 * dt * e2) + b
    e4 = a @ (dt * e3) + b
    b_d = (dt / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
    return a_d, b_d


def _forward_sim_linear(lin_step, state_dim, x0, controls):
    a_d, b_d = lin_step
    n_steps = controls.shape[0]
    states = np.empty((n_steps + 1, state_dim))
    states[0] = x0
    x = np.asarray(x0, dtype=float)
    for i in range(n_steps):
        x = a_d @ x + b_d @ controls[i]
        states[i + 1] = x
    if not np.all(np.isfinite(states)):
        raise PlanDivergedError("planner forward simulation diverged")
    return states


def _forward_sim(system: ControlAffineSystem, x0, controls, dt, keep_stages=False):
    """Integrate the horizon without wrapping; optionally keep RK4 stages."""
    n_steps = controls.shape[0]
    states = np.empty((n_steps + 1, system.state_dim))
    states[0] = x0
    stages = np.empty((n_steps, 3, system.state_dim)) if keep_stages else None
    x = np.asarray(x0, dtype=float)
    f = system.f
    for i in range(n_steps):
        u = controls[i]
        k1 = f(x, u)
        s2 = x + 0.5 * dt * k1
        k2 = f(s2, u)
        s3 = x + 0.5 * dt * k2
        k3 = f(s3, u)
        s4 = x + dt * k3
        k4 = f(s4, u)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if keep_stages:
            stages[i, 0] = s2
            stages[i, 1] = s3
            stages[i, 2] = s4
        states[i + 1] = x
    if not np.all(np.isfinite(states)):
        raise PlanDivergedError("planner forward simulation diverged")
    return states, stages


def evaluate_plan(system, task, cfg, x0, controls, hist_integral=None, t_hist=0.0,
                  with_gradient=True):
    """Objective (and exact discrete-adjoint gradient) of a candidate plan."""
    ws = _TaskWorkspace(system, task, cfg)
    return _evaluate_plan(ws, x0, controls, hist_integral, t_hist, with_gradient)


def _evaluate_plan(ws: _TaskWorkspace, x0, controls, hist_integral, t_hist, with_gradient):
    cfg, system = ws.cfg, ws.system
    dt = cfg.plan_dt
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    n_steps = controls.shape[0]
    times = np.arange(n_steps + 1) * dt
    if ws.lin_step is not None:
        states = _forward_sim_linear(ws.lin_step, system.state_dim, x0, controls)
        stages = None
    else:
        states, stages = _forward_sim(system, x0, controls, dt, keep_stages=with_gradient)
    j, eps, (diff, quad, total_time) = ws.objective_terms(
        times, states, controls, hist_integral, t_hist
    )
    if not with_gradient:
        return j, eps, None

    # per-sample gradient of the ergodic + barrier terms w.r.t. the state
    pts = states[:, ws.proj]
    gradf = basis_gradient(pts, cfg.order, ws.task.domain)  # (N+1, modes, nproj)
    coef = 2.0 * cfg.q * (ws.weights * diff) / total_time
    g_proj = np.einsum("m,nmd->nd", coef, gradf) * quad[:, None]
    _, bgrads = ws.barrier_terms(states)
    sample_grad = np.zeros_like(states)
    for j_dim, col in enumerate(ws.proj):
        sample_grad[:, col] += g_proj[:, j_dim]
    for j_dim, bar_idx in enumerate(ws.barrier_dims):
        sample_grad[:, ws.proj[bar_idx]] += cfg.barrier_weight * quad * bgrads[:, j_dim]

    # reverse sweep: exact adjoint of the RK4 steps
    grad_u = np.empty_like(controls)
    lam = sample_grad[n_steps].copy()
    if ws.lin_step is not None:
        a_t = ws.lin_step[0].T
        b_t = ws.lin_step[1].T
        r_mat = ws.r_mat
        for i in range(n_steps - 1, -1, -1):
            grad_u[i] = b_t @ lam + dt * (r_mat @ controls[i])
            lam = a_t @ lam + sample_grad[i]
        return j, eps, grad_u
    jac_x, jac_u = system.jac_x, system.jac_u
    for i in range(n_steps - 1, -1, -1):
        u = controls[i]
        s1 = states[i]
        s2, s3, s4 = stages[i]
        xbar = lam.copy()
        k1b = (dt / 6.0) * lam
        k2b = (dt / 3.0) * lam
        k3b = (dt / 3.0) * lam
        k4b = (dt / 6.0) * lam
        ubar = np.zeros(system.control_dim)

        s4b = jac_x(s4, u).T @ k4b
        ubar += jac_u(s4, u).T @ k4b
        xbar += s4b
        k3b = k3b + dt * s4b

        s3b = jac_x(s3, u).T @ k3b
        ubar += jac_u(s3, u).T @ k3b
        xbar += s3b
        k2b = k2b + 0.5 * dt * s3b

        s2b = jac_x(s2, u).T @ k2b
        ubar += jac_u(s2, u).T @ k2b
        xbar += s2b
        k1b = k1b + 0.5 * dt * s2b

        s1b = jac_x(s1, u).T @ k1b
        ubar += jac_u(s1, u).T @ k1b
        xbar += s1b

        grad_u[i] = ubar + dt * (ws.r_mat @ u)
        lam = xbar + sample_grad[i]
    return j, eps, grad_u


def shift_plan(controls: np.ndarray, cfg: MpcConfig) -> np.ndarray:
    """Advance the previous plan by one control period, zero-padding the tail."""
    shift = round(cfg.control_period / cfg.plan_dt)
    out = np.zeros_like(controls)
    if shift < controls.shape[0]:
        out[:-shift] = controls[shift:]
    return out


def plan(system, task, cfg, x_now, hist_integral=None, t_hist=0.0, prev_plan=None):
    """One receding-horizon replan; returns (controls over the horizon, diagnostics)."""
    ws = _TaskWorkspace(system, task, cfg)
    return _plan(ws, x_now, hist_integral, t_hist, prev_plan, t_now=t_hist)


def _plan(ws: _TaskWorkspace, x_now, hist_integral, t_hist, prev_plan, t_now):
    cfg, system = ws.cfg, ws.system
    n_steps = round(cfg.horizon / cfg.plan_dt)
    if prev_plan is None:
        controls = np.zeros((n_steps, system.control_dim))
    else:
        controls = np.clip(shift_plan(prev_plan, cfg), system.u_min, system.u_max)

    j, eps, grad = _evaluate_plan(ws, x_now, controls, hist_integral, t_hist,
                                  with_gradient=cfg.max_iters > 0)
    diag = PlanDiagnostics(
        t=t_now, eps_before=eps, eps_after=eps, j_before=j, j_after=j,
        iterations=0, line_search_evals=0, exhausted=False, j_history=[j],
    )
    for _ in range(cfg.max_iters):
        direction = -grad / cfg.plan_dt
        alpha = cfg.alpha0
        accepted = False
        no_descent = False
        for _ in range(cfg.max_backtracks):
            candidate = np.clip(controls + alpha * direction, system.u_min, system.u_max)
            step = candidate - controls
            predicted = float(np.sum(grad * step))
            if predicted >= -1e-15 * (1.0 + abs(j)):
                no_descent = True  # saturated or stationary: nothing to try
                break
            diag.line_search_evals += 1
            try:
                j_new, eps_new, _ = _evaluate_plan(
                    ws, x_now, candidate, hist_integral, t_hist, with_gradient=False
                )
            except PlanDivergedError:
                alpha *= cfg.shrink
                continue
            if j_new <= j + cfg.slope_tol * predicted:
                accepted = True
                break
            alpha *= cfg.shrink
        if not accepted:
            diag.exhausted = not no_descent
            break
        decrease = j - j_new
        controls = candidate
        diag.iterations += 1
        j, eps, grad = _evaluate_plan(ws, x_now, controls, hist_integral, t_hist,
                                      with_gradient=True)
        diag.j_history.append(j)
        if decrease < cfg.converge_tol:
            break
    diag.j_after = j
    diag.eps_after = eps
    return controls, diag


class Controller:
    """Owns the running coefficient accumulator and warm-started plan for one rollout."""

    def __init__(self, system: ControlAffineSystem, task: TaskDefinition, cfg: MpcConfig):
        self.ws = _TaskWorkspace(system, task, cfg)
        self.system = system
        self.task = task
        self.cfg = cfg
        n_modes = (cfg.order + 1) ** task.domain.n
        self.hist_integral = np.zeros(n_modes)
        self.t_hist = 0.0
        self.prev_plan = None
        self._last_f = None  # basis row at the latest realized sample

    def running_eps(self, x) -> float:
        """Distance from ergodicity of the realized trajectory so far."""
        if self.t_hist > 0.0:
            coeffs = self.hist_integral / self.t_hist
        else:
            pts = np.asarray(x, dtype=float)[None, self.ws.proj]
            coeffs = basis_matrix(pts, self.cfg.order, self.task.domain)[0]
        diff = coeffs - self.ws.phi
        return float(np.dot(self.ws.weights, diff * diff))

    def replan(self, x_now, t_now: float):
        controls, diag = _plan(
            self.ws, np.asarray(x_now, dtype=float), self.hist_integral, self.t_hist,
            self.prev_plan, t_now,
        )
        self.prev_plan = controls
        return controls, diag

    def accumulate(self, x_prev, x_new):
        """Trapezoid update of the realized coefficient integral over one sim step."""
        if self._last_f is None:
            pts = np.asarray(x_prev, dtype=float)[None, self.ws.proj]
            self._last_f = basis_matrix(pts, self.cfg.order, self.task.domain)[0]
        pts = np.asarray(x_new, dtype=float)[None, self.ws.proj]
        f_new = basis_matrix(pts, self.cfg.order, self.task.domain)[0]
        self.hist_integral += 0.5 * self.cfg.sim_dt * (self._last_f + f_new)
        self.t_hist += self.cfg.sim_dt
        self._last_f = f_new


def run_closed_loop(system, task, cfg, x0, t_f, step_callback=None, should_cancel=None,
                    meta=None) -> RolloutResult:
    """Replan every control period and apply the plan's head until t_f."""
    if t_f <= 0.0:
        raise ValueError("rollout duration must be positive")
    controller = Controller(system, task, cfg)
    x = system.wrap_state(np.asarray(x0, dtype=float))
    record_every = round(cfg.record_dt / cfg.sim_dt)
    knots_per_period = round(cfg.control_period / cfg.plan_dt)
    subs_per_knot = round(cfg.plan_dt / cfg.sim_dt)

    times, states, controls_log, eps_log = [0.0], [x.copy()], [], []
    replans = []
    cancelled = diverged = False
    eps_log.append(controller.running_eps(x))
    u_active = np.zeros(system.control_dim)
    controls_log.append(u_active.copy())

    step_idx = 0
    t = 0.0
    while t < t_f - 1e-12 and not cancelled and not diverged:
        if should_cancel is not None and should_cancel():
            cancelled = True
            break
        plan_controls, diag = controller.replan(x, t)
        replans.append(diag)
        for knot in range(knots_per_period):
            if t >= t_f - 1e-12:
                break
            u_active = system.clamp_control(plan_controls[knot])
            for _ in range(subs_per_knot):
                if t >= t_f - 1e-12:
                    break
                try:
                    x_new = step_rk4(system, x, u_active, cfg.sim_dt)
                except IntegrationDivergedError:
                    diverged = True
                    break
                controller.accumulate(x, x_new)
                x = x_new
                step_idx += 1
                t = step_idx * cfg.sim_dt
                if step_idx % record_every == 0:
                    times.append(t)
                    states.append(x.copy())
                    controls_log.append(u_active.copy())
                    eps_log.append(controller.running_eps(x))
                    if step_callback is not None:
                        step_callback(t, x, u_active, eps_log[-1])
            if diverged:
                break

    result = RolloutResult(
        times=np.array(times),
        states=np.array(states),
        controls=np.array(controls_log),
        eps_running=np.array(eps_log),
        replans=replans,
        final_eps=eps_log[-1],
        cancelled=cancelled,
        diverged=diverged,
        meta=dict(meta or {}),
    )
    return result


def save_rollout_csv(path, result: RolloutResult, state_names=None, control_names=None):
    n = result.states.shape[1]
    m = result.controls.shape[1]
    state_cols = list(state_names) if state_names else [f"x_{i}" for i in range(n)]
    ctrl_cols = list(control_names) if control_names else [f"u_{i}" for i in range(m)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + state_cols + ctrl_cols + ["eps_running"])
        for i in range(result.times.size):
            row = [repr(float(result.times[i]))]
            row += [repr(float(v)) for v in result.states[i]]
            row += [repr(float(v)) for v in result.controls[i]]
            row.append(repr(float(result.eps_running[i])))
            writer.writerow(row)


def load_rollout_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows)
    n_states = sum(1 for h in header if h.startswith("x_") or h in
                   ("theta", "theta_dot", "cart_pos", "cart_vel", "x", "y", "x_dot", "y_dot"))
    times = data[:, 0]
    states = data[:, 1 : 1 + n_states]
    controls = data[:, 1 + n_states : -1]
    eps = data[:, -1]
    return times, states, controls, eps
