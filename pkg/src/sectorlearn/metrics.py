"""Agent-versus-oracle convergence diagnostics over disjoint step windows."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import EmptyWindow, LengthMismatch

DEFAULT_WINDOW = 200


@dataclass
class TraceWindow:
    agent_rewards: Sequence[int]
    oracle_rewards: Sequence[int]
    agent_actions: Sequence[tuple[int, ...]]
    oracle_actions: Sequence[tuple[int, ...]]

    def __post_init__(self):
        n = len(self.agent_rewards)
        if not (len(self.oracle_rewards) == len(self.agent_actions) == len(self.oracle_actions) == n):
            raise LengthMismatch("trace sequences differ in length")
        if n == 0:
            raise EmptyWindow("window holds no steps")

    def __len__(self) -> int:
        return len(self.agent_rewards)


def asd(window: TraceWindow) -> float:
    """Mean squared difference between agent and oracle rewards."""
    d = np.asarray(window.agent_rewards, dtype=float) - np.asarray(window.oracle_rewards, dtype=float)
    return float(np.mean(d * d))


def am(window: TraceWindow, per_sector: bool = False):
    """Fraction of steps whose action differs from the oracle's.

    Joint mismatch (any sector differs) by default; one fraction per sector
    with ``per_sector``.
    """
    A = np.asarray(window.agent_actions, dtype=int).reshape(len(window), -1)
    O = np.asarray(window.oracle_actions, dtype=int).reshape(len(window), -1)
    if A.shape != O.shape:
        raise LengthMismatch(f"agent actions {A.shape} vs oracle actions {O.shape}")
    diff = A != O
    if per_sector:
        return diff.mean(axis=0)
    return float(diff.any(axis=1).mean())


def am_reward_equivalent(window: TraceWindow, per_sector: bool = False):
    """Like :func:`am` but a step whose reward equals the oracle's counts as a match."""
    A = np.asarray(window.agent_actions, dtype=int).reshape(len(window), -1)
    O = np.asarray(window.oracle_actions, dtype=int).reshape(len(window), -1)
    if A.shape != O.shape:
        raise LengthMismatch(f"agent actions {A.shape} vs oracle actions {O.shape}")
    same_reward = np.asarray(window.agent_rewards) == np.asarray(window.oracle_rewards)
    diff = (A != O) & ~same_reward[:, None]
    if per_sector:
        return diff.mean(axis=0)
    return float(diff.any(axis=1).mean())


def error_band(values: Sequence[float]) -> tuple[float, float]:
    """(mean, largest absolute deviation from the mean)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyWindow("error band of an empty window")
    mean = float(v.mean())
    return mean, float(np.max(np.abs(v - mean)))


def windows(n_steps: int, size: int = DEFAULT_WINDOW) -> list[tuple[int, int]]:
    """Disjoint, complete windows [start, stop) covering the trace; a ragged tail is dropped."""
    if size < 1:
        raise ValueError("window size must be >= 1")
    return [(s, s + size) for s in range(0, n_steps - size + 1, size)]


@dataclass
class WindowMetrics:
    window_start: int
    asd: float
    asd_maxdev: float
    am_joint: float
    am_sector: list[float]
    am_receq_sector: list[float]


def window_metrics(trace: dict, start: int, stop: int) -> WindowMetrics:
    """Metrics of steps [start, stop) of a trace dict holding the per-step columns."""
    w = TraceWindow(
        trace["reward"][start:stop], trace["oracle_reward"][start:stop],
        trace["actions"][start:stop], trace["oracle_actions"][start:stop],
    )
    sq = (np.asarray(w.agent_rewards, dtype=float) - np.asarray(w.oracle_rewards, dtype=float)) ** 2
    mean, dev = error_band(sq)
    return WindowMetrics(start, mean, dev, am(w), list(map(float, am(w, True))),
                         list(map(float, am_reward_equivalent(w, True))))


def compute_metrics(trace: dict, size: int = DEFAULT_WINDOW) -> list[WindowMetrics]:
    return [window_metrics(trace, a, b) for a, b in windows(len(trace["reward"]), size)]


def write_metrics(rows: Sequence[WindowMetrics], n_sectors: int, dest: IO[str]) -> None:
    cols = ["window_start", "asd", "asd_maxdev"] + [f"am_sector_{m}" for m in range(n_sectors)]
    cols += ["am_joint"] + [f"am_receq_sector_{m}" for m in range(n_sectors)]
    dest.write(",".join(cols) + "\n")
    for r in rows:
        vals = [str(r.window_start), repr(r.asd), repr(r.asd_maxdev)] + [repr(x) for x in r.am_sector]
        vals += [repr(r.am_joint)] + [repr(x) for x in r.am_receq_sector]
        dest.write(",".join(vals) + "\n")


TRACE_COLUMNS = ("step", "scenario_id", "epsilon", "actions", "reward", "oracle_reward", "oracle_actions")


def _actions_str(a: Sequence[int]) -> str:
    return "|".join(str(int(x)) for x in a)


def write_trace_row(dest: IO[str], step: int, scenario_id: str, epsilon: float, actions, reward: int,
                    oracle_reward: int, oracle_actions) -> None:
    dest.write(f"{step},{scenario_id},{epsilon!r},{_actions_str(actions)},{reward},{oracle_reward},"
               f"{_actions_str(oracle_actions)}\n")


def read_trace(source) -> dict:
    """Parse a per-step trace file into column lists (actions as tuples)."""
    close = False
    if not hasattr(source, "read"):
        source, close = open(source, encoding="utf-8", newline=""), True
    try:
        reader = csv.DictReader(source)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        out = {c: [] for c in TRACE_COLUMNS}
        for row in reader:
            out["step"].append(int(row["step"]))
            out["scenario_id"].append(row["scenario_id"])
            out["epsilon"].append(float(row["epsilon"]))
            out["actions"].append(tuple(int(x) for x in row["actions"].split("|")))
            out["reward"].append(int(row["reward"]))
            out["oracle_reward"].append(int(row["oracle_reward"]))
            out["oracle_actions"].append(tuple(int(x) for x in row["oracle_actions"].split("|")))
    finally:
        if close:
            source.close()
    return out
