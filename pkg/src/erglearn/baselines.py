"""Synthetic demonstrators for the benchmark tasks.

The cart-pole expert pumps energy toward the upright level and hands off to
a discrete LQR near the top; negatives are randomized low-energy pumping
that oscillates near the rest state and never inverts. Planar demos are
waypoint tracks: target-reaching splines, loitering rings at the obstacle,
lawnmower sweeps, and tight orbits.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm, solve_discrete_are

from . import metrics
from .demos import Demonstration
from .dynamics import CartPoleParams, cartpole_energy, make_cartpole, make_planar, step_rk4
from .metrics import DEFAULT_OBSTACLE, DEFAULT_TARGET, Disc, cartpole_success, cleaning_score, reach_success

CONTROL_HZ = 50.0
CONTROL_DT = 1.0 / CONTROL_HZ
SIM_DT = 0.002


class GenerationError(RuntimeError):
    """A generator could not produce a demonstration with the required outcome."""


def upright_lqr_gain(params: CartPoleParams = CartPoleParams(), dt: float = CONTROL_DT,
                     q_diag=(100.0, 10.0, 0.5, 2.0), r: float = 0.1):
    """Discrete LQR gain for the linearization at the inverted equilibrium."""
    g, length = params.gravity, params.pole_length
    a_cont = np.zeros((4, 4))
    a_cont[0, 1] = 1.0
    a_cont[1, 0] = g / length
    a_cont[2, 3] = 1.0
    b_cont = np.array([[0.0], [-1.0 / length], [0.0], [1.0]])
    aug = np.zeros((5, 5))
    aug[:4, :4] = a_cont
    aug[:4, 4:] = b_cont
    phi = expm(aug * dt)
    a_d, b_d = phi[:4, :4], phi[:4, 4:]
    p = solve_discrete_are(a_d, b_d, np.diag(q_diag), np.array([[r]]))
    gain = np.linalg.solve(b_d.T @ p @ b_d + r, b_d.T @ p @ a_d)
    return gain, a_d, b_d


def _simulate_cartpole(duration, control_law, rng, noise_scale, params, u_limit=20.0):
    system = make_cartpole(params, u_limit=u_limit)
    steps_per_tick = round(CONTROL_DT / SIM_DT)
    n_ticks = int(round(duration * CONTROL_HZ))
    x = system.rest_state.copy()
    times = [0.0]
    states = [x.copy()]
    for tick in range(n_ticks):
        t = tick * CONTROL_DT
        u = control_law(t, x)
        if noise_scale > 0.0:
            u = u + noise_scale * rng.standard_normal()
        u = float(np.clip(u, -u_limit, u_limit))
        for _ in range(steps_per_tick):
            x = step_rk4(system, x, u, SIM_DT)
        times.append((tick + 1) * CONTROL_DT)
        states.append(x.copy())
    return np.array(times), np.array(states)


def expert_cartpole(duration: float, noise_scale: float = 0.0, seed: int = 0,
                    params: CartPoleParams = CartPoleParams()) -> Demonstration:
    """Swing-up plus LQR catch; retries with re-seeded noise on failure."""
    if duration < 10.0:
        raise ValueError("expert demonstrations need at least 10 s")
    gain, _, _ = upright_lqr_gain(params)
    e_top = params.gravity * params.pole_length
    k_pump = 1.6

    def control_law(t, x):
        theta, theta_dot = x[0], x[1]
        if abs(theta) < 0.3:
            return float(-(gain @ x)[0])
        energy = cartpole_energy(x, params)
        direction = np.sign(theta_dot * np.cos(theta)) if theta_dot != 0.0 else 1.0
        u = k_pump * (energy - e_top) * direction
        # soft cart centering so pumping does not drift down the track
        u -= 0.4 * x[2] + 0.6 * x[3]
        return float(u)

    last_err = None
    for attempt in range(3):
        rng = np.random.default_rng(seed + 1000 * attempt)
        times, states = _simulate_cartpole(duration, control_law, rng, noise_scale, params)
        result = cartpole_success(times, states)
        if result.total_success_time > 0.5 * duration - 5.0:
            return Demonstration(
                id=f"expert-cartpole-s{seed}",
                system="cartpole",
                times=times,
                states=states,
                label="positive",
                source="synthetic",
                meta={"seed": seed, "noise_scale": noise_scale, "attempt": attempt},
            )
        last_err = f"success time {result.total_success_time:.2f} s of {duration:.0f} s"
    raise GenerationError(f"expert stabilization failed after 3 retries ({last_err})")


def negative_cartpole(duration: float, seed: int = 0,
                      params: CartPoleParams = CartPoleParams()) -> Demonstration:
    """Failed-novice pumping: swings harden over time but always turn back
    outside the success region; asserted never to succeed."""
    if duration < 10.0:
        raise ValueError("negative demonstrations need at least 10 s")
    g_l = params.gravity * params.pole_length
    for attempt in range(5):
        rng = np.random.default_rng(seed + 1000 * attempt)
        start_amp = rng.uniform(0.5, 0.9)  # initial swing from rest, rad
        nearest = rng.uniform(0.85, 1.25)  # closest swing approach to upright, rad
        e_low = -g_l * np.cos(start_amp)
        e_miss = g_l * np.cos(nearest)  # turning point stays well outside |theta| < 0.4
        k_pump = rng.uniform(0.8, 1.4)
        kick = rng.uniform(2.0, 5.0) * rng.choice([-1.0, 1.0])
        # novice phases: timid swings growing into near misses, then giving up
        t_peak = rng.uniform(0.60, 0.70) * duration
        t_quit = rng.uniform(0.82, 0.88) * duration

        def e_target_at(t):
            if t < t_quit:
                return e_low + (e_miss - e_low) * min(t / t_peak, 1.0)
            return e_low

        def control_law(t, x):
            theta, theta_dot = x[0], x[1]
            if t < 0.6:
                return kick * np.sin(2.0 * np.pi * t / 0.6)
            energy = cartpole_energy(x, params)
            direction = np.sign(theta_dot * np.cos(theta)) if theta_dot != 0.0 else 1.0
            u = k_pump * (energy - e_target_at(t)) * direction
            u -= 0.4 * x[2] + 0.6 * x[3]
            return float(u)

        times, states = _simulate_cartpole(duration, control_law, rng, 0.15, params)
        if cartpole_success(times, states).total_success_time == 0.0:
            return Demonstration(
                id=f"negative-cartpole-s{seed}",
                system="cartpole",
                times=times,
                states=states,
                label="negative",
                source="synthetic",
                meta={"seed": seed, "attempt": attempt},
            )
    raise GenerationError("negative generator kept entering the success region")


def _resample_path(waypoints: np.ndarray, duration: float, smooth: int = 9) -> np.ndarray:
    """Constant-speed resampling of a polyline to the 50 Hz grid."""
    seg = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0.0:
        n = int(round(duration * CONTROL_HZ)) + 1
        return np.tile(waypoints[0], (n, 1))
    n = int(round(duration * CONTROL_HZ)) + 1
    s = np.linspace(0.0, arc[-1], n)
    pts = np.stack([np.interp(s, arc, waypoints[:, i]) for i in range(2)], axis=1)
    if smooth > 1:
        kernel = np.ones(smooth) / smooth
        pad = smooth // 2
        padded = np.vstack([np.tile(pts[0], (pad, 1)), pts, np.tile(pts[-1], (pad, 1))])
        pts = np.stack(
            [np.convolve(padded[:, i], kernel, mode="valid") for i in range(2)], axis=1
        )
    return pts


def _push_clear(points: np.ndarray, disc: Disc, clearance: float) -> np.ndarray:
    d = points - np.asarray(disc.center)
    dist = np.hypot(d[:, 0], d[:, 1])
    mask = dist < clearance
    safe = np.where(dist[mask] > 1e-9, dist[mask], 1e-9)
    points = points.copy()
    points[mask] = np.asarray(disc.center) + d[mask] / safe[:, None] * clearance
    return points


def _positions_to_demo(points, duration, demo_id, label, seed, meta=None):
    n = points.shape[0]
    times = np.arange(n) * CONTROL_DT
    vel = np.gradient(points, times, axis=0)
    states = np.hstack([points, vel])
    return Demonstration(
        id=demo_id,
        system="planar",
        times=times,
        states=states,
        label=label,
        source="synthetic",
        meta={"seed": seed, **(meta or {})},
    )


def _reach_positive(rng, obstacle, target, duration):
    start = np.array([rng.uniform(0.08, 0.25), rng.uniform(0.08, 0.25)])
    heading = np.asarray(target.center) - start
    heading = heading / np.linalg.norm(heading)
    # demonstrators detour on a consistent side of the travel line, which
    # fuses the demos into one strong corridor around the object
    side = np.array([-heading[1], heading[0]])
    detour = np.asarray(obstacle.center) + side * rng.uniform(0.24, 0.32)
    dwell_frac = 0.45
    travel = np.vstack([start, detour, np.asarray(target.center)])
    travel_pts = _resample_path(travel, duration * (1.0 - dwell_frac))
    ang = rng.uniform(0.0, 2 * np.pi)
    n_dwell = int(round(duration * dwell_frac * CONTROL_HZ))
    tt = np.arange(n_dwell) * CONTROL_DT
    dwell = np.asarray(target.center) + 0.35 * target.radius * np.stack(
        [np.cos(2.0 * tt + ang), np.sin(2.0 * tt + ang)], axis=1
    )
    pts = np.vstack([travel_pts, dwell])
    pts = _push_clear(pts, obstacle, obstacle.radius + 0.07)
    return np.clip(pts, 0.02, 0.98)


def _reach_negative(rng, obstacle, duration):
    n = int(round(duration * CONTROL_HZ)) + 1
    t = np.arange(n) * CONTROL_DT
    omega = rng.uniform(0.8, 1.4) * rng.choice([-1.0, 1.0])
    phase = rng.uniform(0.0, 2 * np.pi)
    rho = 0.16 + 0.03 * np.sin(0.5 * t + phase)
    pts = np.asarray(obstacle.center) + rho[:, None] * np.stack(
        [np.cos(omega * t + phase), np.sin(omega * t + phase)], axis=1
    )
    return np.clip(pts, 0.02, 0.98)


def _clean_positive(rng, obstacle, duration):
    margin = rng.uniform(0.06, 0.1)
    rows = rng.integers(6, 9)
    levels = np.linspace(margin, 1.0 - margin, rows)
    if rng.random() < 0.5:
        levels = levels[::-1]
    waypoints = []
    for i, y in enumerate(levels):
        xs = [margin, 1.0 - margin] if i % 2 == 0 else [1.0 - margin, margin]
        waypoints.append([xs[0], y])
        waypoints.append([xs[1], y])
    waypoints = np.array(waypoints)
    ring_r = obstacle.radius + rng.uniform(0.035, 0.05)
    ang = np.linspace(0.0, 2 * np.pi, 24)
    ring = np.asarray(obstacle.center) + ring_r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    waypoints = np.vstack([waypoints, ring])
    pts = _resample_path(waypoints, duration)
    pts = _push_clear(pts, obstacle, obstacle.radius + 0.035)
    return np.clip(pts, 0.02, 0.98)


def _clean_negative(rng, obstacle, duration):
    n = int(round(duration * CONTROL_HZ)) + 1
    t = np.arange(n) * CONTROL_DT
    omega = rng.uniform(1.0, 1.8) * rng.choice([-1.0, 1.0])
    phase = rng.uniform(0.0, 2 * np.pi)
    rho = 0.125 + 0.02 * np.sin(0.4 * t + phase)
    pts = np.asarray(obstacle.center) + rho[:, None] * np.stack(
        [np.cos(omega * t + phase), np.sin(omega * t + phase)], axis=1
    )
    return pts


def scripted_planar(task: str, variant: str, seed: int = 0, duration: float | None = None,
                    obstacle: Disc = DEFAULT_OBSTACLE, target: Disc = DEFAULT_TARGET) -> Demonstration:
    """Waypoint-following planar demos for the reach and clean tasks."""
    if task not in ("reach", "clean"):
        raise ValueError("task must be 'reach' or 'clean'")
    if variant not in ("positive", "negative"):
        raise ValueError("variant must be 'positive' or 'negative'")
    for attempt in range(5):
        rng = np.random.default_rng(seed + 1000 * attempt)
        if task == "reach":
            dur = duration if duration is not None else rng.uniform(10.0, 15.0)
            if variant == "positive":
                pts = _reach_positive(rng, obstacle, target, dur)
                ok = reach_success(pts, target, obstacle)
            else:
                pts = _reach_negative(rng, obstacle, dur)
                ok = not reach_success(pts, target, obstacle)
        else:
            if variant == "positive":
                dur = duration if duration is not None else rng.uniform(40.0, 50.0)
                pts = _clean_positive(rng, obstacle, dur)
                score = cleaning_score(pts, obstacle)
                ok = (not score.collided) and score.m >= 0.8
            else:
                dur = duration if duration is not None else rng.uniform(18.0, 25.0)
                pts = _clean_negative(rng, obstacle, dur)
                score = cleaning_score(pts, obstacle)
                ok = score.m < 0.5
        if ok:
            return _positions_to_demo(
                pts, dur, f"{variant}-{task}-s{seed}", variant, seed,
                meta={"task": task, "attempt": attempt},
            )
    raise GenerationError(f"could not generate a faithful {variant} {task} demo (seed {seed})")
