"""Exhaustive-search baseline over all joint beam assignments."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .array_beams import ArrayConfig, BeamPool
from .channel import ScenarioSnapshot, channel_matrix
from .coverage import RadioConstants, assigned_powers, beam_powers, coverage_from_powers
from .errors import BudgetExceeded

MAX_ASSIGNMENTS = 10**6


@dataclass
class OracleResult:
    best_assignment: tuple[int, ...]
    best_reward: int
    per_assignment_rewards: dict[tuple[int, ...], int] = field(default_factory=dict)

    def is_unique(self) -> bool:
        """True when the audit map shows a single maximiser."""
        if not self.per_assignment_rewards:
            raise ValueError("uniqueness needs the audit map (audit=True)")
        return sum(r == self.best_reward for r in self.per_assignment_rewards.values()) == 1


def best_from_powers(
    G: Sequence[np.ndarray], constants: RadioConstants, audit: bool = False, budget: int = MAX_ASSIGNMENTS
) -> OracleResult:
    """Search over precomputed per-beam powers (see :func:`coverage.beam_powers`)."""
    sizes = [g.shape[0] for g in G]
    if math.prod(sizes) > budget:
        raise BudgetExceeded(f"{math.prod(sizes)} assignments exceed the budget of {budget}")
    best, best_r = None, -1
    rewards = {}
    for assignment in itertools.product(*(range(j) for j in sizes)):
        r = coverage_from_powers(assigned_powers(G, assignment), constants).connected_count
        if audit:
            rewards[assignment] = r
        if r > best_r:
            best, best_r = assignment, r
    return OracleResult(best, best_r, rewards)


def exhaustive_best(
    snapshot: ScenarioSnapshot,
    pools: Sequence[BeamPool],
    constants: RadioConstants,
    config: ArrayConfig | None = None,
    audit: bool = False,
    budget: int = MAX_ASSIGNMENTS,
) -> OracleResult:
    """Lexicographically first assignment maximising the connected-UE count."""
    sizes = [len(p) for p in pools]
    if math.prod(sizes) > budget:
        raise BudgetExceeded(f"{math.prod(sizes)} assignments exceed the budget of {budget}")
    H = channel_matrix(config or ArrayConfig(), snapshot, len(pools))
    return best_from_powers(beam_powers(H, pools, constants.tx_mw), constants, audit, budget)


def write_oracle_trace(rows, dest: IO[str]) -> None:
    """Rows of (step, scenario_id, best_assignment, best_reward)."""
    dest.write("step,scenario_id,best_assignment,best_reward\n")
    for step, sid, assignment, reward in rows:
        dest.write(f"{step},{sid},{'|'.join(map(str, assignment))},{reward}\n")
