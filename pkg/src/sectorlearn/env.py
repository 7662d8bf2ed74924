"""Scenario-driven broadcast-beam environment used for offline training.

Timing of one step ``t``:

1. the UE population is in scenario ``sigma_t``; the agent already holds the
   stacked connection frames measured under the beams applied at ``t - 1``;
2. the agent picks beams ``a_t``; coverage of ``sigma_t`` under ``a_t`` gives
   the reward (connected-UE count);
3. the population moves to ``sigma_{t+1}`` and reports its connection vector
   under ``a_t``; that vector is appended to the frame history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array_beams import build_pool
from .channel import ScenarioSnapshot, channel_matrix, load_raytrace, synth_links
from .config import ExperimentConfig
from .coverage import assigned_powers, beam_powers, coverage_from_powers, encode_state
from .mobility import ScenarioProcess, sample_positions
from .oracle import OracleResult, best_from_powers

AUDIT_LIMIT = 4096


@dataclass
class CacheEntry:
    snapshot: ScenarioSnapshot
    powers: list[np.ndarray]
    oracle: OracleResult
    unique_optimum: bool | None


class BeamEnvironment:
    def __init__(self, cfg: ExperimentConfig, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.pools = [build_pool(cfg.array, specs) for specs in cfg.pool_specs()]
        self.constants = cfg.radio
        self.frame_cols = cfg.network.frame_cols
        self.n_frames = cfg.network.n_frames
        self._cache: dict[tuple, CacheEntry] = {}
        self._file_snapshots: list[ScenarioSnapshot] | None = None
        if cfg.channel.source == "raytrace":
            self._file_snapshots = load_raytrace(cfg.channel.raytrace_path, n_sectors=cfg.n_sectors)
            self.n_ues = self._file_snapshots[0].n_ues
        else:
            self.n_ues = cfg.n_ues
        self._scenario_index = {s.id: i for i, s in enumerate(cfg.scenarios)}
        self.reset()

    @property
    def n_beams(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.pools)

    @property
    def state_shape(self) -> tuple[int, int, int]:
        return (self.n_frames, math.ceil(self.n_ues / self.frame_cols), self.frame_cols)

    # -- scenario bookkeeping

    def reset(self) -> np.ndarray:
        self.t = 0
        self.process = None
        if self._file_snapshots is None:
            self.process = ScenarioProcess(self.cfg.mobility.schedule(), np.random.default_rng([self.seed, 101]))
        self.changes = 0
        init = self.cfg.training.initial_beams
        self.beams = tuple(init) if init is not None else (0,) * self.cfg.n_sectors
        self.history = [self._connection(self.current_key(), self.beams)]
        return self.state()

    def scenario_id(self) -> str:
        if self._file_snapshots is not None:
            return self._file_snapshots[self.t % len(self._file_snapshots)].scenario_id
        return self.process.current

    def current_key(self) -> tuple:
        if self._file_snapshots is not None:
            return ("file", self.t % len(self._file_snapshots))
        mode = self.cfg.snapshot_mode
        draw = 0 if mode == "scenario" else self.changes if mode == "change" else self.t
        return (self.process.current, draw)

    def _advance(self) -> None:
        before = self.scenario_id()
        self.t += 1
        if self.process is not None:
            self.process.step()
        if self.scenario_id() != before:
            self.changes += 1

    # -- snapshots, powers and oracle

    def make_snapshot(self, key: tuple, timestamp: int = 0) -> ScenarioSnapshot:
        if key[0] == "file":
            return self._file_snapshots[key[1]]
        sid, draw = key
        rng = np.random.default_rng([self.seed, 202, self._scenario_index[sid], draw])
        positions = sample_positions(self.cfg.scenario(sid), self.n_ues, rng, self.cfg.cell)
        links = synth_links(self.cfg.sectors, positions, self.cfg.channel.params, rng)
        return ScenarioSnapshot(timestamp, sid, positions, links, n_sectors=self.cfg.n_sectors)

    def entry(self, key: tuple) -> CacheEntry:
        hit = self._cache.get(key)
        if hit is None:
            snap = self.make_snapshot(key)
            H = channel_matrix(self.cfg.array, snap, self.cfg.n_sectors)
            G = beam_powers(H, self.pools, self.constants.tx_mw)
            audit = math.prod(self.n_beams) <= AUDIT_LIMIT
            oracle = best_from_powers(G, self.constants, audit=audit)
            unique = oracle.is_unique() if audit else None
            hit = self._cache[key] = CacheEntry(snap, G, oracle, unique)
        return hit

    def oracle_cache(self) -> dict[tuple, CacheEntry]:
        return self._cache

    def _connection(self, key: tuple, beams) -> np.ndarray:
        G = self.entry(key).powers
        return coverage_from_powers(assigned_powers(G, beams), self.constants).connection

    def reward_of(self, beams) -> int:
        G = self.entry(self.current_key()).powers
        return coverage_from_powers(assigned_powers(G, beams), self.constants).connected_count

    # -- agent interface

    def state(self) -> np.ndarray:
        return encode_state(self.history, self.frame_cols, self.n_frames)

    def step(self, actions) -> tuple[int, np.ndarray, bool, dict]:
        actions = tuple(int(a) for a in actions)
        key = self.current_key()
        e = self.entry(key)
        reward = coverage_from_powers(assigned_powers(e.powers, actions), self.constants).connected_count
        info = {
            "t": self.t, "scenario_id": self.scenario_id(), "key": key,
            "oracle_reward": e.oracle.best_reward, "oracle_actions": e.oracle.best_assignment,
        }
        self._advance()
        self.beams = actions
        self.history.append(self._connection(self.current_key(), actions))
        del self.history[: -self.n_frames]
        return reward, self.state(), False, info

    # -- resume support

    def get_state(self) -> dict:
        return {
            "t": self.t, "changes": self.changes, "beams": list(self.beams),
            "process": None if self.process is None else self.process.get_state(),
        }

    def history_array(self) -> np.ndarray:
        return np.stack(self.history)

    def set_state(self, state: dict, history: np.ndarray) -> None:
        self.t = int(state["t"])
        self.changes = int(state["changes"])
        self.beams = tuple(state["beams"])
        if self.process is not None:
            self.process.set_state(state["process"])
        self.history = [np.asarray(h, dtype=np.uint8) for h in history]
