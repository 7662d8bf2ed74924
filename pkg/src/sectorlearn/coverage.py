"""Received power, SINR, connection state, coverage reward and state frames."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .array_beams import ArrayConfig, BeamPool, BeamWeights
from .channel import ScenarioSnapshot, channel_matrix
from .errors import DimensionMismatch

N_FRAMES = 4


@dataclass(frozen=True)
class RadioConstants:
    """Noise, threshold and per-sector transmit power (broadcast symbol power 1)."""

    noise_power_dbm: float = -95.0
    sinr_threshold_db: float = -6.0
    tx_power_dbm: float = 0.0

    @property
    def noise_mw(self) -> float:
        return 10.0 ** (self.noise_power_dbm / 10.0)

    @property
    def tx_mw(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0)


@dataclass
class CoverageReport:
    sinr_db: np.ndarray
    serving_sector: np.ndarray
    connection: np.ndarray  # uint8 bits, length K
    connected_count: int


def rx_power(h, f) -> float:
    """|h^T f|^2 with a plain (non-conjugating) transpose."""
    w = f.w if isinstance(f, BeamWeights) else np.asarray(f)
    h = np.asarray(h)
    if h.shape != w.shape:
        raise DimensionMismatch(f"channel length {h.shape} vs weights {w.shape}")
    return float(abs(np.sum(h * w)) ** 2)


def beam_powers(H: np.ndarray, pools: Sequence[BeamPool], tx_mw: float = 1.0) -> np.ndarray:
    """Received power of every (sector, beam, UE) as a list of (J_m, K) arrays.

    ``H`` is the (M, K, N) channel array from :func:`channel_matrix`.
    """
    out = []
    for m, pool in enumerate(pools):
        W = pool.matrix()
        if W.shape[1] != H.shape[2]:
            raise DimensionMismatch(f"pool {m} has {W.shape[1]} weights per beam, channel has {H.shape[2]}")
        out.append(tx_mw * np.abs(W @ H[m].T) ** 2)
    return out


def coverage_from_powers(P: np.ndarray, constants: RadioConstants) -> CoverageReport:
    """SINR and connection state from an (M, K) matrix of received powers in mW."""
    P = np.asarray(P, dtype=float)
    serving = np.argmax(P, axis=0)
    cols = np.arange(P.shape[1])
    signal = P[serving, cols]
    # sum the other rows directly; total - signal would lose precision
    others = P.copy()
    others[serving, cols] = 0.0
    interference = others.sum(axis=0)
    sinr = signal / (interference + constants.noise_mw)
    with np.errstate(divide="ignore"):
        sinr_db = 10.0 * np.log10(sinr)
    bits = (sinr_db > constants.sinr_threshold_db).astype(np.uint8)
    return CoverageReport(sinr_db, serving, bits, int(bits.sum()))


def assigned_powers(G: Sequence[np.ndarray], assignment: Sequence[int]) -> np.ndarray:
    if len(assignment) != len(G):
        raise DimensionMismatch(f"assignment has {len(assignment)} entries for {len(G)} sectors")
    return np.stack([G[m][j] for m, j in enumerate(assignment)])


def evaluate(
    snapshot: ScenarioSnapshot,
    pools: Sequence[BeamPool],
    assignment: Sequence[int],
    constants: RadioConstants,
    config: ArrayConfig | None = None,
) -> CoverageReport:
    """Coverage of one snapshot under a beam assignment (max-RSRP association)."""
    if config is None:
        config = ArrayConfig()
    for m, j in enumerate(assignment):
        if not 0 <= j < len(pools[m]):
            raise IndexError(f"beam index {j} outside pool of size {len(pools[m])} for sector {m}")
    H = channel_matrix(config, snapshot, len(pools))
    G = beam_powers(H, pools, constants.tx_mw)
    return coverage_from_powers(assigned_powers(G, assignment), constants)


def encode_state(history: Sequence[np.ndarray], frame_cols: int = 100, n_frames: int = N_FRAMES) -> np.ndarray:
    """Stack the newest ``n_frames`` connection vectors as (n_frames, rows, cols) frames.

    Vectors are laid out row-major and zero-padded; a short history repeats
    its oldest entry.  The newest frame is last.
    """
    if frame_cols < 1:
        raise ValueError("frame_cols must be >= 1")
    if len(history) == 0:
        raise ValueError("history must hold at least one connection state")
    recent = list(history[-n_frames:])
    recent = [recent[0]] * (n_frames - len(recent)) + recent
    K = len(recent[0])
    rows = math.ceil(K / frame_cols)
    out = np.zeros((n_frames, rows * frame_cols), dtype=np.uint8)
    for i, bits in enumerate(recent):
        out[i, :K] = bits
    return out.reshape(n_frames, rows, frame_cols)


def decode_frame(frames: np.ndarray, n_ues: int) -> np.ndarray:
    """Newest frame flattened and stripped of padding."""
    return frames[-1].reshape(-1)[:n_ues].copy()


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    total, scale = 0.0, 1.0
    for r in rewards:
        total += scale * r
        scale *= gamma
    return total


def write_report(report: CoverageReport, step: int, dest: IO[str], header: bool = False) -> None:
    if header:
        dest.write("step,ue_id,serving_sector,sinr_db,connected\n")
    for k in range(len(report.connection)):
        dest.write(f"{step},{k},{int(report.serving_sector[k])},{float(report.sinr_db[k])!r},"
                   f"{int(report.connection[k])}\n")
