"""UE population dynamics: scenario regions and periodic / Markov scenario switching."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyRegion


@dataclass(frozen=True)
class CellExtent:
    """Bounding box used for any coordinate a scenario leaves unconstrained."""

    x_min: float = 0.0
    x_max: float = 4000.0
    y_min: float = -500.0
    y_max: float = 500.0
    z_min: float = 0.0
    z_max: float = 30.0


@dataclass(frozen=True)
class ScenarioDef:
    id: str
    x_min: float | None = None
    x_max: float | None = None
    y_min: float | None = None
    y_max: float | None = None
    z_min: float | None = None
    z_max: float | None = None

    def __post_init__(self):
        for axis in "xyz":
            lo, hi = getattr(self, f"{axis}_min"), getattr(self, f"{axis}_max")
            if lo is not None and hi is not None and lo > hi:
                raise EmptyRegion(f"scenario {self.id}: {axis}_min {lo} > {axis}_max {hi}")

    def box(self, extent: CellExtent) -> tuple[tuple[float, float], ...]:
        out = []
        for axis in "xyz":
            lo = getattr(self, f"{axis}_min")
            hi = getattr(self, f"{axis}_max")
            lo = getattr(extent, f"{axis}_min") if lo is None else lo
            hi = getattr(extent, f"{axis}_max") if hi is None else hi
            if lo > hi:
                raise EmptyRegion(f"scenario {self.id}: empty {axis} range [{lo}, {hi}] inside the cell")
            out.append((lo, hi))
        return tuple(out)

    def contains(self, p: Sequence[float]) -> bool:
        for axis, v in zip("xyz", p):
            lo, hi = getattr(self, f"{axis}_min"), getattr(self, f"{axis}_max")
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                return False
        return True


def sample_positions(
    scenario: ScenarioDef, n_ues: int, rng: np.random.Generator, extent: CellExtent | None = None
) -> list[tuple[float, float, float]]:
    """Draw ``n_ues`` i.i.d. uniform positions from the scenario's box."""
    if n_ues < 1:
        raise ValueError("n_ues must be >= 1")
    box = scenario.box(extent or CellExtent())
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    pts = lo + (hi - lo) * rng.random((n_ues, 3))
    return [tuple(map(float, p)) for p in pts]


@dataclass(frozen=True)
class PeriodicSchedule:
    period_steps: int
    scenario_cycle: tuple[str, ...]

    def __post_init__(self):
        if self.period_steps < 1:
            raise ValueError("period_steps must be >= 1")
        if not self.scenario_cycle:
            raise ValueError("scenario_cycle must not be empty")


@dataclass(frozen=True)
class MarkovSchedule:
    states: tuple[str, ...]
    transition: tuple[tuple[float, ...], ...]
    initial: str

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        n = len(self.states)
        if P.shape != (n, n):
            raise ValueError(f"transition matrix must be {n}x{n}, got {P.shape}")
        if np.any(P < 0) or np.any(P > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition rows must sum to 1")
        if self.initial not in self.states:
            raise ValueError(f"initial state {self.initial!r} not among {self.states}")


def scenario_at(schedule: PeriodicSchedule, t: int) -> str:
    if t < 0:
        raise ValueError("t must be >= 0")
    return schedule.scenario_cycle[(t // schedule.period_steps) % len(schedule.scenario_cycle)]


def advance(schedule: MarkovSchedule, current: str, rng: np.random.Generator) -> str:
    """Draw the next scenario from the row of ``current``."""
    i = schedule.states.index(current)
    cdf = np.cumsum(schedule.transition[i])
    j = int(np.searchsorted(cdf, rng.random(), side="right"))
    return schedule.states[min(j, len(schedule.states) - 1)]


class ScenarioProcess:
    """Stateful scenario sequence driven by either schedule kind.

    ``current`` is the scenario at step ``t``; :meth:`step` moves to ``t + 1``.
    """

    def __init__(self, schedule: PeriodicSchedule | MarkovSchedule, rng: np.random.Generator):
        self.schedule = schedule
        self.rng = rng
        self.t = 0
        if isinstance(schedule, PeriodicSchedule):
            self.current = scenario_at(schedule, 0)
        else:
            self.current = schedule.initial

    def step(self) -> str:
        self.t += 1
        if isinstance(self.schedule, PeriodicSchedule):
            self.current = scenario_at(self.schedule, self.t)
        else:
            self.current = advance(self.schedule, self.current, self.rng)
        return self.current

    def get_state(self) -> dict:
        return {"t": self.t, "current": self.current, "rng": self.rng.bit_generator.state}

    def set_state(self, state: dict) -> None:
        self.t = int(state["t"])
        self.current = state["current"]
        self.rng.bit_generator.state = state["rng"]
