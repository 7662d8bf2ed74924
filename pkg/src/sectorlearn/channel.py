"""Multipath link data, ray-trace style file I/O and channel vectors.

Ray-trace files are comma-separated UTF-8 text with the header::

    timestamp,scenario_id,sector_id,ue_id,ue_x,ue_y,ue_z,aod_az_deg,aod_elev_deg,pathloss_db,phase_deg

One row per path.  A row whose four path columns are empty declares a link
with no paths (fully blocked).  Extra trailing columns (for example angles of
arrival) are accepted and ignored.  Optional leading ``#`` lines may declare
``n_sectors=<M> n_ues=<K>``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .array_beams import ArrayConfig, steering_vector
from .errors import DegenerateGeometry, EmptyDataset, LinkIndexError, MissingLink, ParseError

SPEED_OF_LIGHT = 299_792_458.0

RAYTRACE_COLUMNS = (
    "timestamp", "scenario_id", "sector_id", "ue_id", "ue_x", "ue_y", "ue_z",
    "aod_az_deg", "aod_elev_deg", "pathloss_db", "phase_deg",
)
HISTORY_COLUMNS = ("timestamp", "ue_id", "x", "y", "z")


@dataclass(frozen=True)
class PathRecord:
    aod_az_deg: float
    aod_elev_deg: float
    pathloss_db: float
    phase_deg: float

    def __post_init__(self):
        if not (self.pathloss_db >= 0):
            raise ValueError(f"pathloss_db must be >= 0, got {self.pathloss_db}")
        if not (math.isfinite(self.aod_az_deg) and math.isfinite(self.aod_elev_deg)):
            raise ValueError("path angles must be finite")


@dataclass(frozen=True)
class LinkPaths:
    sector_id: int
    ue_id: int
    paths: tuple[PathRecord, ...] = ()


@dataclass
class ScenarioSnapshot:
    timestamp: int
    scenario_id: str
    ue_positions: list[tuple[float, float, float]]
    links: dict[tuple[int, int], LinkPaths] = field(default_factory=dict)
    n_sectors: int | None = None

    @property
    def n_ues(self) -> int:
        return len(self.ue_positions)

    def sector_count(self) -> int:
        if self.n_sectors is not None:
            return self.n_sectors
        return 1 + max((m for m, _ in self.links), default=-1)


@dataclass(frozen=True)
class SectorSite:
    """Sector antenna location; ``azimuth_deg`` is the boresight bearing in the x-y plane."""

    x: float
    y: float
    z: float
    azimuth_deg: float = 0.0


@dataclass(frozen=True)
class SynthChannelParams:
    carrier_freq_hz: float = 2.0e9
    n_nlos_paths: int = 0
    nlos_excess_loss_db: float = 10.0
    shadowing_sigma_db: float = 0.0
    los_blockage_prob: float = 0.0
    nlos_az_spread_deg: float = 30.0
    nlos_elev_spread_deg: float = 5.0

    def __post_init__(self):
        for name in ("carrier_freq_hz", "n_nlos_paths", "nlos_excess_loss_db", "shadowing_sigma_db",
                     "nlos_az_spread_deg", "nlos_elev_spread_deg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.los_blockage_prob <= 1.0:
            raise ValueError("los_blockage_prob must lie in [0, 1]")


def fspl_db(distance_m: float, freq_hz: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance_m * freq_hz / SPEED_OF_LIGHT)


def _wrap_deg(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


def departure_angles(site: SectorSite, ue: Sequence[float]) -> tuple[float, float, float]:
    """(azimuth, elevation, 3-D distance) of a UE as seen from a sector."""
    dx, dy, dz = ue[0] - site.x, ue[1] - site.y, ue[2] - site.z
    horiz = math.hypot(dx, dy)
    dist = math.sqrt(horiz * horiz + dz * dz)
    if dist == 0.0:
        raise DegenerateGeometry(f"UE at {tuple(ue)} coincides with sector at {(site.x, site.y, site.z)}")
    az = _wrap_deg(math.degrees(math.atan2(dy, dx)) - site.azimuth_deg)
    elev = math.degrees(math.atan2(-dz, horiz))
    return az, elev, dist


def _as_site(s) -> SectorSite:
    if isinstance(s, SectorSite):
        return s
    return SectorSite(*map(float, s))


def synth_links(
    sector_positions: Sequence,
    ue_positions: Sequence[Sequence[float]],
    params: SynthChannelParams,
    rng: np.random.Generator,
) -> dict[tuple[int, int], LinkPaths]:
    """Geometry-consistent synthetic multipath, one LinkPaths per (sector, UE).

    Draws are made in sector-major, UE-minor order so the result is a pure
    function of the inputs and the generator state.
    """
    sites = [_as_site(s) for s in sector_positions]
    wavelength = SPEED_OF_LIGHT / params.carrier_freq_hz
    links = {}
    for m, site in enumerate(sites):
        for k, ue in enumerate(ue_positions):
            az, elev, dist = departure_angles(site, ue)
            base_loss = fspl_db(dist, params.carrier_freq_hz)
            blocked = rng.random() < params.los_blockage_prob
            shadow = rng.normal(0.0, params.shadowing_sigma_db) if params.shadowing_sigma_db > 0 else 0.0
            paths = []
            if not blocked:
                phase = (-360.0 * dist / wavelength) % 360.0
                paths.append(PathRecord(az, elev, max(base_loss + shadow, 0.0), phase))
            for _ in range(params.n_nlos_paths):
                excess = rng.exponential(params.nlos_excess_loss_db) if params.nlos_excess_loss_db > 0 else 0.0
                d_az = rng.uniform(-params.nlos_az_spread_deg, params.nlos_az_spread_deg)
                d_el = rng.uniform(-params.nlos_elev_spread_deg, params.nlos_elev_spread_deg)
                phase = rng.uniform(0.0, 360.0)
                paths.append(PathRecord(
                    _wrap_deg(az + d_az),
                    float(np.clip(elev + d_el, -90.0, 90.0)),
                    max(base_loss + shadow + excess, 0.0),
                    phase,
                ))
            links[(m, k)] = LinkPaths(m, k, tuple(paths))
    return links


def channel_vector(config: ArrayConfig, link: LinkPaths) -> np.ndarray:
    """h = sum over paths of complex gain times the departure steering vector."""
    h = np.zeros(config.n_elements, dtype=complex)
    if not link.paths:
        return h
    az = np.array([p.aod_az_deg for p in link.paths])
    el = np.array([p.aod_elev_deg for p in link.paths])
    gain = 10.0 ** (-np.array([p.pathloss_db for p in link.paths]) / 20.0)
    gain = gain * np.exp(1j * np.deg2rad([p.phase_deg for p in link.paths]))
    return gain @ steering_vector(config, az, el)


def channel_matrix(config: ArrayConfig, snapshot: ScenarioSnapshot, n_sectors: int) -> np.ndarray:
    """All channel vectors of a snapshot as an (M, K, N) array."""
    H = np.zeros((n_sectors, snapshot.n_ues, config.n_elements), dtype=complex)
    for m in range(n_sectors):
        for k in range(snapshot.n_ues):
            link = snapshot.links.get((m, k))
            if link is None:
                raise MissingLink(f"no link for sector {m}, UE {k} at timestamp {snapshot.timestamp}")
            H[m, k] = channel_vector(config, link)
    return H


# ---------------------------------------------------------------- file I/O


def _fmt(x: float) -> str:
    return repr(float(x))


def write_raytrace(snapshots: Iterable[ScenarioSnapshot], dest: IO[str], n_sectors: int | None = None) -> None:
    snapshots = list(snapshots)
    if n_sectors is None:
        n_sectors = max(s.sector_count() for s in snapshots) if snapshots else 0
    n_ues = max((s.n_ues for s in snapshots), default=0)
    dest.write(f"# n_sectors={n_sectors} n_ues={n_ues}\n")
    dest.write(",".join(RAYTRACE_COLUMNS) + "\n")
    for snap in snapshots:
        for (m, k) in sorted(snap.links):
            link = snap.links[(m, k)]
            x, y, z = snap.ue_positions[k]
            prefix = f"{snap.timestamp},{snap.scenario_id},{m},{k},{_fmt(x)},{_fmt(y)},{_fmt(z)}"
            if not link.paths:
                dest.write(prefix + ",,,,\n")
            for p in link.paths:
                dest.write(f"{prefix},{_fmt(p.aod_az_deg)},{_fmt(p.aod_elev_deg)},"
                           f"{_fmt(p.pathloss_db)},{_fmt(p.phase_deg)}\n")


def _text_stream(source) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, encoding="utf-8", newline="")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _declared(lines: list[str]) -> dict[str, int]:
    out = {}
    for line in lines:
        for tok in line.lstrip("#").split():
            if "=" in tok:
                key, val = tok.split("=", 1)
                if key in ("n_sectors", "n_ues"):
                    out[key] = int(val)
    return out


def load_raytrace(source, n_sectors: int | None = None, n_ues: int | None = None) -> list[ScenarioSnapshot]:
    """Parse a ray-trace file (path, bytes or stream) into snapshots ordered by timestamp.

    ``n_sectors``/``n_ues`` override any values declared in the file header.
    """
    stream = _text_stream(source)
    try:
        text = stream.read()
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
    raw_lines = text.splitlines()
    comments, body_start = [], 0
    while body_start < len(raw_lines) and raw_lines[body_start].startswith("#"):
        comments.append(raw_lines[body_start])
        body_start += 1
    declared = _declared(comments)
    M = n_sectors if n_sectors is not None else declared.get("n_sectors")
    K = n_ues if n_ues is not None else declared.get("n_ues")

    reader = csv.reader(raw_lines[body_start:])
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("ray-trace source has no header") from None
    header = [h.strip() for h in header]
    if tuple(header[: len(RAYTRACE_COLUMNS)]) != RAYTRACE_COLUMNS:
        raise ParseError(f"unexpected header {header}", body_start + 1)
    n_cols = len(header)

    snaps: dict[int, ScenarioSnapshot] = {}
    paths: dict[int, dict[tuple[int, int], list[PathRecord]]] = {}
    positions: dict[int, dict[int, tuple[float, float, float]]] = {}
    for i, row in enumerate(reader, start=body_start + 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != n_cols:
            raise ParseError(f"expected {n_cols} columns, got {len(row)}", i)
        try:
            ts, m, k = int(row[0]), int(row[2]), int(row[3])
            pos = (float(row[4]), float(row[5]), float(row[6]))
            path_fields = [c.strip() for c in row[7:11]]
            rec = None
            if any(path_fields):
                rec = PathRecord(*(float(c) for c in path_fields))
        except ValueError as exc:
            raise ParseError(str(exc), i) from None
        if m < 0 or (M is not None and m >= M):
            raise LinkIndexError(f"line {i}: sector_id {m} outside declared range 0..{M}")
        if k < 0 or (K is not None and k >= K):
            raise LinkIndexError(f"line {i}: ue_id {k} outside declared range 0..{K}")
        if ts not in snaps:
            snaps[ts] = ScenarioSnapshot(ts, row[1], [], n_sectors=M)
            paths[ts] = {}
            positions[ts] = {}
        elif snaps[ts].scenario_id != row[1]:
            raise ParseError(f"timestamp {ts} carries two scenario ids", i)
        positions[ts][k] = pos
        bucket = paths[ts].setdefault((m, k), [])
        if rec is not None:
            bucket.append(rec)

    if not snaps:
        raise EmptyDataset("ray-trace source contains no path rows")
    out = []
    for ts in sorted(snaps):
        snap = snaps[ts]
        n = K if K is not None else 1 + max(positions[ts])
        missing = [k for k in range(n) if k not in positions[ts]]
        if missing:
            raise ParseError(f"timestamp {ts} has no rows for UEs {missing[:5]}")
        snap.ue_positions = [positions[ts][k] for k in range(n)]
        snap.links = {mk: LinkPaths(mk[0], mk[1], tuple(p)) for mk, p in sorted(paths[ts].items())}
        out.append(snap)
    return out


def write_location_history(rows: Iterable[tuple[int, int, float, float, float]], dest: IO[str]) -> None:
    dest.write(",".join(HISTORY_COLUMNS) + "\n")
    for ts, k, x, y, z in rows:
        dest.write(f"{ts},{k},{_fmt(x)},{_fmt(y)},{_fmt(z)}\n")


def load_location_history(source) -> dict[int, list[tuple[float, float, float]]]:
    """UE location history: timestamp -> positions ordered by ue_id."""
    stream = _text_stream(source)
    try:
        reader = csv.reader(stream)
        header = [h.strip() for h in next(reader, [])]
        if tuple(header) != HISTORY_COLUMNS:
            raise ParseError(f"unexpected header {header}", 1)
        by_ts: dict[int, dict[int, tuple[float, float, float]]] = {}
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HISTORY_COLUMNS):
                raise ParseError(f"expected {len(HISTORY_COLUMNS)} columns, got {len(row)}", i)
            try:
                ts, k = int(row[0]), int(row[1])
                by_ts.setdefault(ts, {})[k] = (float(row[2]), float(row[3]), float(row[4]))
            except ValueError as exc:
                raise ParseError(str(exc), i) from None
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
    if not by_ts:
        raise EmptyDataset("location history is empty")
    return {ts: [d[k] for k in sorted(d)] for ts, d in sorted(by_ts.items())}


def snapshots_from_history(
    history: dict[int, list[tuple[float, float, float]]],
    sectors: Sequence,
    params: SynthChannelParams,
    seed: int,
    scenario_ids: dict[int, str] | None = None,
) -> list[ScenarioSnapshot]:
    """Attach synthetic propagation to each timestamp of a location history."""
    out = []
    for ts, positions in history.items():
        rng = np.random.default_rng([seed, ts])
        links = synth_links(sectors, positions, params, rng)
        sid = (scenario_ids or {}).get(ts, "history")
        out.append(ScenarioSnapshot(ts, sid, list(positions), links, n_sectors=len(sectors)))
    return out
