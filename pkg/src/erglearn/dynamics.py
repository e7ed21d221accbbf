"""Control-affine benchmark systems and numerical integration.

Both benchmarks follow xdot = g(x) + h(x) u. The cart-pole uses a massless
cart driven directly in acceleration, so the input is the cart acceleration
itself; the planar system is a double integrator over a workspace box.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import Domain

GRAVITY = 9.81


class IntegrationDivergedError(RuntimeError):
    """Raised when a state stops being finite during integration."""


@dataclass(frozen=True)
class ControlAffineSystem:
    name: str
    state_dim: int
    control_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    control_matrix: Callable[[np.ndarray], np.ndarray]
    u_min: np.ndarray
    u_max: np.ndarray
    periodic_dims: tuple
    projection: tuple
    ergodic_domain: Domain
    rest_state: np.ndarray
    state_names: tuple
    jac_x: Callable[[np.ndarray, np.ndarray], np.ndarray] = None
    jac_u: Callable[[np.ndarray, np.ndarray], np.ndarray] = None
    constant_jacobians: bool = False  # true for linear dynamics (enables fast planning)

    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.drift(x) + self.control_matrix(x) @ np.atleast_1d(u)

    def clamp_control(self, u) -> np.ndarray:
        return np.clip(np.atleast_1d(np.asarray(u, dtype=float)), self.u_min, self.u_max)

    def wrap_state(self, x: np.ndarray) -> np.ndarray:
        """Fold periodic coordinates into (-pi, pi]."""
        x = np.array(x, dtype=float)
        for i, per in enumerate(self.periodic_dims):
            if per:
                x[i] = np.pi - np.mod(np.pi - x[i], 2.0 * np.pi)
        return x

    def projected_periodic(self) -> tuple:
        return tuple(self.periodic_dims[i] for i in self.projection)


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = GRAVITY
    pole_length: float = 1.0

    def __post_init__(self):
        if self.pole_length <= 0.0:
            raise ValueError("pole length must be positive")


@dataclass(frozen=True)
class PlanarParams:
    workspace: Domain = field(
        default_factory=lambda: Domain(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    )
    velocity_limit: float = 1.5

    def __post_init__(self):
        if self.workspace.n != 2:
            raise ValueError("planar workspace must be 2-D")
        if self.velocity_limit <= 0.0:
            raise ValueError("velocity limit must be positive")


def cartpole_deriv(x, u, params: CartPoleParams = CartPoleParams()) -> np.ndarray:
    """State derivative for [theta, theta_dot, cart_pos, cart_vel], input = cart accel.

    theta = 0 is the inverted equilibrium; theta = +-pi is rest.
    """
    theta, theta_dot, _, cart_vel = np.asarray(x, dtype=float)
    accel = float(np.atleast_1d(u)[0])
    g, length = params.gravity, params.pole_length
    theta_ddot = (g * np.sin(theta) - accel * np.cos(theta)) / length
    return np.array([theta_dot, theta_ddot, cart_vel, accel])


def planar_deriv(x, u) -> np.ndarray:
    """Double-integrator derivative for [x, y, x_dot, y_dot], input = accelerations."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return np.array([x[2], x[3], u[0], u[1]])


def make_cartpole(params: CartPoleParams = CartPoleParams(), u_limit: float = 20.0) -> ControlAffineSystem:
    g, length = params.gravity, params.pole_length

    def drift(x):
        theta = x[0]
        return np.array([x[1], g * np.sin(theta) / length, x[3], 0.0])

    def control_matrix(x):
        return np.array([[0.0], [-np.cos(x[0]) / length], [0.0], [1.0]])

    def jac_x(x, u):
        theta = x[0]
        accel = float(np.atleast_1d(u)[0])
        jac = np.zeros((4, 4))
        jac[0, 1] = 1.0
        jac[1, 0] = (g * np.cos(theta) + accel * np.sin(theta)) / length
        jac[2, 3] = 1.0
        return jac

    return ControlAffineSystem(
        name="cartpole",
        state_dim=4,
        control_dim=1,
        drift=drift,
        control_matrix=control_matrix,
        u_min=np.array([-u_limit]),
        u_max=np.array([u_limit]),
        periodic_dims=(True, False, False, False),
        projection=(0, 1),
        ergodic_domain=Domain(np.array([-np.pi, -6.0]), np.array([2.0 * np.pi, 12.0])),
        rest_state=np.array([np.pi, 0.0, 0.0, 0.0]),
        state_names=("theta", "theta_dot", "cart_pos", "cart_vel"),
        jac_x=jac_x,
        jac_u=lambda x, u: control_matrix(x),
    )


def make_planar(params: PlanarParams = PlanarParams(), u_limit: float = 2.0) -> ControlAffineSystem:
    ws = params.workspace

    def drift(x):
        return np.array([x[2], x[3], 0.0, 0.0])

    control_mat = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    jac = np.zeros((4, 4))
    jac[0, 2] = 1.0
    jac[1, 3] = 1.0

    center = ws.lower + ws.lengths / 2.0
    return ControlAffineSystem(
        name="planar",
        state_dim=4,
        control_dim=2,
        drift=drift,
        control_matrix=lambda x: control_mat,
        u_min=np.array([-u_limit, -u_limit]),
        u_max=np.array([u_limit, u_limit]),
        periodic_dims=(False, False, False, False),
        projection=(0, 1),
        ergodic_domain=ws,
        rest_state=np.array([center[0], center[1], 0.0, 0.0]),
        state_names=("x", "y", "x_dot", "y_dot"),
        jac_x=lambda x, u: jac,
        jac_u=lambda x, u: control_mat,
        constant_jacobians=True,
    )


def make_system(name: str, **kwargs) -> ControlAffineSystem:
    if name == "cartpole":
        return make_cartpole(**kwargs)
    if name == "planar":
        return make_planar(**kwargs)
    raise ValueError(f"unknown system '{name}'")


def step_rk4(system: ControlAffineSystem, x, u, dt: float) -> np.ndarray:
    """One classical RK4 step with zero-order-hold control.

    Control is clamped to bounds before integration; periodic coordinates
    are wrapped afterwards.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = system.clamp_control(u)
    k1 = system.f(x, u)
    k2 = system.f(x + 0.5 * dt * k1, u)
    k3 = system.f(x + 0.5 * dt * k2, u)
    k4 = system.f(x + dt * k3, u)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergedError(f"{system.name} state diverged: {out}")
    return system.wrap_state(out)


def initial_state(system: ControlAffineSystem, seed: int | None = None,
                  avoid=None) -> np.ndarray:
    """Rest state plus a small seeded perturbation (planar: random position).

    For planar systems an (center, radius) exclusion zone can be given so
    starts never spawn on top of a physical obstacle.
    """
    if seed is None:
        return system.rest_state.copy()
    rng = np.random.default_rng(seed)
    if system.name == "cartpole":
        x = system.rest_state + np.array(
            [rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.0, 0.0]
        )
        return system.wrap_state(x)
    dom = system.ergodic_domain
    for _ in range(100):
        pos = dom.lower + dom.lengths * rng.uniform(0.1, 0.9, size=dom.n)
        if avoid is None:
            break
        center, radius = avoid
        if np.hypot(pos[0] - center[0], pos[1] - center[1]) > radius:
            break
    return np.array([pos[0], pos[1], 0.0, 0.0])


def barrier_penalty(x, lower, upper):
    """One-sided quadratic box penalty and its gradient; zero strictly inside."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    over = np.maximum(x - upper, 0.0)
    under = np.maximum(lower - x, 0.0)
    value = float(np.sum(over**2) + np.sum(under**2))
    grad = 2.0 * over - 2.0 * under
    return value, grad


def cartpole_energy(x, params: CartPoleParams = CartPoleParams()) -> float:
    """Pendulum energy per unit mass: 0.5 l^2 w^2 + g l cos(theta)."""
    theta, theta_dot = x[0], x[1]
    return 0.5 * params.pole_length**2 * theta_dot**2 + params.gravity * params.pole_length * np.cos(theta)
