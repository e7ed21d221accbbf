"""Fusing labeled demonstrations into a spatial task definition.

Each demonstration contributes its trajectory coefficients with a signed
weight: positive demos add density where they spent time, negative demos
subtract it. Weights are length-normalized within each label class and
scaled so they always sum to one, which pins the zero-order coefficient
and keeps the fused distribution unit-mass:

    posonly:  w_j =  T_j / sum(T_pos)
    posneg:   w_j = (1+beta) T_j / sum(T_pos)   for positives
              w_j = -beta    T_j / sum(T_neg)   for negatives
    negonly:  uniform pseudo-demo gets (1+gamma), negatives total -gamma
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics
from .demos import DemoSet
from .spectral import (
    CoefficientSet,
    Domain,
    delta_coefficients,
    mass_normalizer,
    traj_coefficients,
    uniform_coefficients,
)

MODES = ("posonly", "negonly", "posneg")

UNIFORM_ID = "__uniform__"


@dataclass(frozen=True)
class FusionConfig:
    order: int = 10
    beta: float = 0.5
    gamma: float = 0.5

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("coefficient order must be non-negative")
        if self.beta < 0.0 or self.gamma < 0.0:
            raise ValueError("beta and gamma must be non-negative")


@dataclass(frozen=True)
class TaskDefinition:
    phi: CoefficientSet
    domain: Domain
    projection: tuple
    mode: str
    provenance: tuple  # ((demo id, weight), ...)

    def weights_sum(self) -> float:
        return float(sum(w for _, w in self.provenance))


class LabelMissingError(ValueError):
    """A fusion mode requires demonstrations with a label the set lacks."""


def _demo_coefficients(demo, demo_set: DemoSet, order: int, periodic) -> CoefficientSet:
    points = demo.states[:, list(demo_set.projection)]
    return traj_coefficients(demo.times, points, order, demo_set.domain, periodic=periodic)


def learn_task(demo_set: DemoSet, cfg: FusionConfig, mode: str = "posneg") -> TaskDefinition:
    """Fuse a labeled demo set into a task definition for the given mode."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got '{mode}'")
    if not demo_set.demos:
        raise LabelMissingError("demo set is empty")
    positives = demo_set.by_label("positive")
    negatives = demo_set.by_label("negative")
    if mode in ("posonly", "posneg") and not positives:
        raise LabelMissingError(f"{mode} requires at least one positive demonstration")
    if mode == "negonly" and not negatives:
        raise LabelMissingError("negonly requires at least one negative demonstration")

    if demo_set.system is not None:
        sys_periodic = dynamics.make_system(demo_set.system).periodic_dims
        periodic = [sys_periodic[i] for i in demo_set.projection]
    else:
        periodic = None

    contributions = []  # (id, weight, coefficient values)
    if mode == "posonly":
        neg_used = []
        beta = 0.0
    elif mode == "posneg":
        neg_used = negatives
        beta = cfg.beta if negatives else 0.0
    else:  # negonly
        neg_used = negatives
        beta = cfg.gamma

    if mode == "negonly":
        uni = uniform_coefficients(cfg.order, demo_set.domain)
        contributions.append((UNIFORM_ID, 1.0 + beta, uni.values))
    else:
        total_pos = sum(d.effective_length for d in positives)
        for demo in positives:
            w = (1.0 + beta) * demo.effective_length / total_pos
            coeffs = _demo_coefficients(demo, demo_set, cfg.order, periodic)
            contributions.append((demo.id, w, coeffs.values))

    if neg_used and beta > 0.0:
        total_neg = sum(d.effective_length for d in neg_used)
        for demo in neg_used:
            w = -beta * demo.effective_length / total_neg
            coeffs = _demo_coefficients(demo, demo_set, cfg.order, periodic)
            contributions.append((demo.id, w, coeffs.values))

    values = np.zeros((cfg.order + 1) ** demo_set.domain.n)
    for _, w, vals in contributions:
        values += w * vals
    values[0] = 1.0 / mass_normalizer(demo_set.domain)  # exact unit mass

    phi = CoefficientSet(order=cfg.order, domain=demo_set.domain, values=values)
    return TaskDefinition(
        phi=phi,
        domain=demo_set.domain,
        projection=demo_set.projection,
        mode=mode,
        provenance=tuple((name, w) for name, w, _ in contributions),
    )


def true_task_cartpole(order: int, domain: Domain | None = None) -> TaskDefinition:
    """Point-concentration task at the inverted equilibrium (theta, theta_dot) = (0, 0)."""
    if domain is None:
        domain = Domain(np.array([-np.pi, -6.0]), np.array([2.0 * np.pi, 12.0]))
    if not domain.contains([0.0, 0.0]):
        raise ValueError("domain must contain the inverted equilibrium")
    phi = delta_coefficients([0.0, 0.0], order, domain)
    return TaskDefinition(
        phi=phi,
        domain=domain,
        projection=(0, 1),
        mode="posonly",
        provenance=(("true-inverted", 1.0),),
    )


def save_task(path, task: TaskDefinition) -> None:
    payload = {
        "version": 1,
        "mode": task.mode,
        "K": task.phi.order,
        "domain": {"lower": task.domain.lower.tolist(), "lengths": task.domain.lengths.tolist()},
        "projection": list(task.projection),
        "phi": task.phi.values.tolist(),
        "provenance": [{"id": name, "w": w} for name, w in task.provenance],
    }
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_task(path) -> TaskDefinition:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    domain = Domain(np.array(payload["domain"]["lower"]), np.array(payload["domain"]["lengths"]))
    phi = CoefficientSet(order=int(payload["K"]), domain=domain, values=np.array(payload["phi"]))
    return TaskDefinition(
        phi=phi,
        domain=domain,
        projection=tuple(payload["projection"]),
        mode=payload["mode"],
        provenance=tuple((p["id"], float(p["w"])) for p in payload["provenance"]),
    )
