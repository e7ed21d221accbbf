"""Task-success metrics for the two benchmark systems.

Cart-pole success is time spent near the unstable equilibrium; the planar
tasks are scored by target reaching and a 5x5 coverage grid, both with a
circular obstacle.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import Domain, frequency_weights, ergodic_metric, traj_coefficients
from .task_learning import TaskDefinition

THETA_THRESHOLD = 0.4  # rad
THETA_DOT_THRESHOLD = 0.75  # rad/s
COLLISION_MARGIN = 0.02  # m added to the obstacle radius for cleaning
GRID_CELLS = 5


@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float


DEFAULT_OBSTACLE = Disc(center=(0.5, 0.5), radius=0.08)
DEFAULT_TARGET = Disc(center=(0.8, 0.75), radius=0.08)
DEFAULT_WORKSPACE = Domain(np.array([0.0, 0.0]), np.array([1.0, 1.0]))


@dataclass(frozen=True)
class CartpoleSuccess:
    total_success_time: float
    first_success_time: float | None


@dataclass(frozen=True)
class CleaningScore:
    m: float
    collided: bool
    covered_cells: int
    denominator: int


def in_success_region(theta: float, theta_dot: float) -> bool:
    return bool(abs(theta) < THETA_THRESHOLD and abs(theta_dot) < THETA_DOT_THRESHOLD)


def cartpole_success(times, states) -> CartpoleSuccess:
    """Total time inside the success region (trapezoid on the indicator)."""
    times = np.asarray(times, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[1] < 2:
        raise ValueError("cart-pole trajectory needs theta and theta_dot columns")
    inside = (np.abs(states[:, 0]) < THETA_THRESHOLD) & (
        np.abs(states[:, 1]) < THETA_DOT_THRESHOLD
    )
    total = float(np.trapezoid(inside.astype(float), times))
    hits = np.flatnonzero(inside)
    first = float(times[hits[0]]) if hits.size else None
    return CartpoleSuccess(total_success_time=total, first_success_time=first)


def ergodicity_vs_true(times, states, true_task: TaskDefinition, periodic=None) -> float:
    """Distance from ergodicity of a trajectory w.r.t. a reference task."""
    pts = np.atleast_2d(np.asarray(states, dtype=float))[:, list(true_task.projection)]
    coeffs = traj_coefficients(times, pts, true_task.phi.order, true_task.domain, periodic=periodic)
    weights = frequency_weights(true_task.phi.order, true_task.domain.n)
    return ergodic_metric(coeffs, true_task.phi, weights)


def _distances(points, disc: Disc) -> np.ndarray:
    d = points - np.asarray(disc.center, dtype=float)
    return np.hypot(d[:, 0], d[:, 1])


def _cell_fully_inside(ix, iy, workspace: Domain, disc: Disc) -> bool:
    x0 = workspace.lower[0] + ix * workspace.lengths[0] / GRID_CELLS
    y0 = workspace.lower[1] + iy * workspace.lengths[1] / GRID_CELLS
    x1 = x0 + workspace.lengths[0] / GRID_CELLS
    y1 = y0 + workspace.lengths[1] / GRID_CELLS
    corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
    return bool(np.all(_distances(corners, disc) <= disc.radius))


def cleaning_score(
    states,
    obstacle: Disc = DEFAULT_OBSTACLE,
    workspace: Domain = DEFAULT_WORKSPACE,
) -> CleaningScore:
    """Coverage fraction on a 5x5 grid, zeroed if the path enters the obstacle."""
    if workspace.n != 2:
        raise ValueError("cleaning workspace must be 2-D")
    points = np.atleast_2d(np.asarray(states, dtype=float))[:, :2]
    excluded = {
        (ix, iy)
        for ix in range(GRID_CELLS)
        for iy in range(GRID_CELLS)
        if _cell_fully_inside(ix, iy, workspace, obstacle)
    }
    denominator = GRID_CELLS * GRID_CELLS - len(excluded)
    collided = bool(np.any(_distances(points, obstacle) < obstacle.radius + COLLISION_MARGIN))
    if collided:
        return CleaningScore(m=0.0, collided=True, covered_cells=0, denominator=denominator)
    rel = (points - workspace.lower) / workspace.lengths
    in_box = np.all((rel >= 0.0) & (rel <= 1.0), axis=1)
    cells = np.clip((rel[in_box] * GRID_CELLS).astype(int), 0, GRID_CELLS - 1)
    visited = {tuple(c) for c in cells} - excluded
    m = len(visited) / denominator if denominator else 0.0
    return CleaningScore(m=m, collided=False, covered_cells=len(visited), denominator=denominator)


def reach_success(
    states,
    target: Disc = DEFAULT_TARGET,
    obstacle: Disc = DEFAULT_OBSTACLE,
) -> bool:
    """True iff some sample is within the target and none strictly inside the obstacle."""
    points = np.atleast_2d(np.asarray(states, dtype=float))[:, :2]
    reached = bool(np.any(_distances(points, target) <= target.radius))
    collided = bool(np.any(_distances(points, obstacle) < obstacle.radius))
    return reached and not collided


METRICS_COLUMNS = [
    "id",
    "mode",
    "success_time",
    "first_success",
    "eps_true",
    "cleaning_m",
    "collided",
    "reach",
]


def write_metrics_csv(path, rows) -> None:
    """Write metric rows (dicts keyed by METRICS_COLUMNS; missing -> blank)."""

    def fmt(value):
        if value is None:
            return ""
        if isinstance(value, bool):
            return str(int(value))
        if isinstance(value, float):
            return repr(value)
        return str(value)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([fmt(row.get(col)) for col in METRICS_COLUMNS])


def read_metrics_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, val in row.items():
                if val == "" or val is None:
                    parsed[key] = None
                elif key in ("id", "mode"):
                    parsed[key] = val
                elif key in ("collided", "reach"):
                    parsed[key] = bool(int(val))
                else:
                    parsed[key] = float(val)
            rows.append(parsed)
    return rows
