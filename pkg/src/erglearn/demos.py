"""Demonstration data model and .demos.jsonl serialization.

A demonstration is a timestamped full-state trajectory with a positive or
negative label. The file format is one JSON object per line: a header with
system metadata, then one record per demonstration. Floats are emitted via
repr so numeric fields survive a round-trip bit-for-bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics
from .spectral import Domain

LABELS = ("positive", "negative")
SOURCES = ("human", "synthetic")
SYSTEMS = ("cartpole", "planar")

STATE_DIMS = {"cartpole": 4, "planar": 4}
STATE_NAMES = {
    "cartpole": ("theta", "theta_dot", "cart_pos", "cart_vel"),
    "planar": ("x", "y", "x_dot", "y_dot"),
}


class DemoFormatError(ValueError):
    """Raised on malformed demo files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Demonstration:
    id: str
    system: str
    times: np.ndarray
    states: np.ndarray
    label: str
    source: str = "human"
    weight_override: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system '{self.system}'")
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got '{self.label}'")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got '{self.source}'")
        times = np.asarray(self.times, dtype=float).ravel()
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if times.size < 2:
            raise ValueError("a demonstration needs at least 2 samples")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")
        if states.shape != (times.size, STATE_DIMS[self.system]):
            raise ValueError(
                f"states must be ({times.size}, {STATE_DIMS[self.system]}) for "
                f"{self.system}, got {states.shape}"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def effective_length(self) -> float:
        """Length used for weighting: duration unless explicitly overridden."""
        if self.weight_override is not None:
            return float(self.weight_override)
        return self.duration


def record(stream, label: str, system: str, demo_id: str, source: str = "human") -> Demonstration:
    """Build a validated demonstration from an ordered (t, state) stream."""
    times, states = [], []
    for t, x in stream:
        times.append(float(t))
        states.append(np.asarray(x, dtype=float))
    if len(times) < 2:
        raise ValueError("a demonstration needs at least 2 samples")
    times = np.array(times)
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("time regression in recorded stream")
    return Demonstration(
        id=demo_id, system=system, times=times, states=np.array(states), label=label, source=source
    )


@dataclass
class DemoSet:
    demos: list
    domain: Domain
    projection: tuple

    def __post_init__(self):
        systems = {d.system for d in self.demos}
        if len(systems) > 1:
            raise ValueError(f"demo set mixes systems: {sorted(systems)}")
        self.projection = tuple(int(i) for i in self.projection)
        if len(self.projection) != self.domain.n:
            raise ValueError("projection size must match domain dimension")

    @property
    def system(self) -> str | None:
        return self.demos[0].system if self.demos else None

    def by_label(self, label: str) -> list:
        return [d for d in self.demos if d.label == label]

    def split_merge_roundtrip(self) -> "DemoSet":
        """Partition by label and re-merge preserving original order."""
        pos = {id(d) for d in self.by_label("positive")}
        merged = [d for d in self.demos if id(d) in pos or d.label == "negative"]
        return DemoSet(demos=merged, domain=self.domain, projection=self.projection)


def default_demo_set(demos, system: str | None = None) -> DemoSet:
    """Bundle demos with the system's default ergodic domain and projection."""
    if system is None:
        if not demos:
            raise ValueError("cannot infer system from an empty demo list")
        system = demos[0].system
    sys = dynamics.make_system(system)
    return DemoSet(demos=list(demos), domain=sys.ergodic_domain, projection=sys.projection)


def _json_floats(arr) -> list:
    return np.asarray(arr, dtype=float).tolist()


def dumps_demos(demos, system: str | None = None) -> str:
    """Serialize demonstrations to .demos.jsonl text."""
    demos = list(demos)
    if system is None:
        if not demos:
            raise ValueError("cannot infer the system tag for an empty file")
        system = demos[0].system
    if system not in SYSTEMS:
        raise ValueError(f"unknown system '{system}'")
    header = {
        "version": 1,
        "system": system,
        "state_dim": STATE_DIMS[system],
        "state_names": list(STATE_NAMES[system]),
    }
    lines = [json.dumps(header)]
    for demo in demos:
        if demo.system != system:
            raise ValueError(f"demo {demo.id} is for {demo.system}, file is {system}")
        rec = {
            "id": demo.id,
            "label": demo.label,
            "source": demo.source,
            "t": _json_floats(demo.times),
            "x": [_json_floats(row) for row in demo.states],
        }
        if demo.weight_override is not None:
            rec["weight_override"] = float(demo.weight_override)
        if demo.meta:
            rec["meta"] = demo.meta
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"


def save_demos(path, demos, system: str | None = None) -> None:
    Path(path).write_text(dumps_demos(demos, system), encoding="utf-8")


def loads_demos(text: str):
    """Parse .demos.jsonl content; returns (system, list of demonstrations)."""
    lines = text.splitlines()
    if not lines:
        raise DemoFormatError("empty file", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise DemoFormatError(f"invalid JSON header: {err}", line=1) from err
    system = header.get("system")
    if system not in SYSTEMS:
        raise DemoFormatError(f"unknown system tag '{system}'", line=1)
    state_dim = header.get("state_dim")
    if state_dim != STATE_DIMS[system]:
        raise DemoFormatError(
            f"state_dim {state_dim} does not match {system} ({STATE_DIMS[system]})", line=1
        )
    demos = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as err:
            raise DemoFormatError(f"invalid JSON: {err}", line=lineno) from err
        try:
            demo = Demonstration(
                id=str(rec["id"]),
                system=system,
                times=np.array(rec["t"], dtype=float),
                states=np.array(rec["x"], dtype=float),
                label=rec["label"],
                source=rec.get("source", "human"),
                weight_override=rec.get("weight_override"),
                meta=rec.get("meta", {}),
            )
        except (KeyError, ValueError) as err:
            raise DemoFormatError(str(err), line=lineno) from err
        demos.append(demo)
    return system, demos


def load_demos(path):
    """Load a .demos.jsonl file; returns (system, list of demonstrations)."""
    return loads_demos(Path(path).read_text(encoding="utf-8"))


def load_demo_set(path, domain: Domain | None = None, projection=None) -> DemoSet:
    system, demos = load_demos(path)
    if domain is None or projection is None:
        sys = dynamics.make_system(system)
        domain = domain if domain is not None else sys.ergodic_domain
        projection = projection if projection is not None else sys.projection
    return DemoSet(demos=demos, domain=domain, projection=projection)
