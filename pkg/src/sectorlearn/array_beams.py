"""Planar sector array: steering vectors, broadcast beam synthesis and beam pools.

Angle conventions used throughout the package:

* azimuth is measured in the horizontal plane from the sector boresight,
  positive counter-clockwise;
* elevation is the depression angle below the horizon (positive = pointing
  down), so a positive e-tilt steers the beam towards the ground.

Weight vectors are flattened elevation-major: element ``(n1, n2)`` sits at
index ``n1 + n_elev * n2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import UnachievableBeamwidth

GAIN_FLOOR_DB = -300.0


@dataclass(frozen=True)
class ArrayConfig:
    n_elev: int = 4
    n_az: int = 4
    d_elev: float = 0.5
    d_az: float = 1.48
    height_m: float = 35.0

    def __post_init__(self):
        if self.n_elev < 1 or self.n_az < 1:
            raise ValueError("array needs at least one element per axis")
        if not (self.d_elev > 0 and self.d_az > 0):
            raise ValueError("element spacings must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_elev * self.n_az


@dataclass(frozen=True)
class BeamSpec:
    """Broadcast beam parameters; ``weights`` optionally overrides synthesis."""

    elev_bw_deg: float
    az_bw_deg: float
    etilt_deg: float
    weights: tuple[complex, ...] | None = None

    def __post_init__(self):
        for name in ("elev_bw_deg", "az_bw_deg"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (-90.0 <= self.etilt_deg <= 90.0):
            raise ValueError(f"etilt_deg must lie in [-90, 90], got {self.etilt_deg}")


@dataclass(frozen=True, eq=False)
class BeamWeights:
    w: np.ndarray
    spec: BeamSpec
    index: int = 0


@dataclass(frozen=True)
class BeamPool:
    beams: tuple[BeamWeights, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.beams) < 1:
            raise ValueError("a beam pool needs at least one beam")

    def __len__(self) -> int:
        return len(self.beams)

    def __getitem__(self, j: int) -> BeamWeights:
        return self.beams[j]

    def matrix(self) -> np.ndarray:
        """Weights stacked as a (J, N) array."""
        return np.stack([b.w for b in self.beams])


def _element_grid(config: ArrayConfig) -> tuple[np.ndarray, np.ndarray]:
    # n1 varies fastest after ravel
    n2, n1 = np.meshgrid(np.arange(config.n_az), np.arange(config.n_elev), indexing="ij")
    return n1.ravel().astype(float), n2.ravel().astype(float)


def steering_vector(config: ArrayConfig, az_deg, elev_deg) -> np.ndarray:
    """Unit-modulus array response; broadcasts over angle arrays.

    Returns shape ``(..., N)`` where ``...`` is the broadcast shape of the angles.
    """
    az = np.deg2rad(np.asarray(az_deg, dtype=float))[..., None]
    el = np.deg2rad(np.asarray(elev_deg, dtype=float))[..., None]
    n1, n2 = _element_grid(config)
    phase = 2 * np.pi * (n1 * config.d_elev * np.sin(el) + n2 * config.d_az * np.sin(az) * np.cos(el))
    return np.exp(1j * phase)


def ula_halfpower_width_deg(n: int, spacing: float) -> float:
    """3 dB beam-width of an ``n``-element uniform broadside line array.

    Returns 180 when the main lobe covers the whole visible region.
    """
    if n == 1:
        return 180.0

    def rel_power(x):
        return (math.sin(x) / (n * math.sin(x / n))) ** 2 - 0.5

    lo, hi = 1e-9, math.pi - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rel_power(mid) > 0:
            lo = mid
        else:
            hi = mid
    u = lo / (n * math.pi * spacing)
    if u >= 1.0:
        return 180.0
    return 2.0 * math.degrees(math.asin(u))


def active_count(n_total: int, spacing: float, requested_deg: float) -> int:
    """Fewest centred elements whose beam is no wider than ``requested_deg``.

    This picks the widest achievable beam that still fits the request.
    """
    if requested_deg > 180.0:
        raise UnachievableBeamwidth(f"requested {requested_deg:.3f} deg is wider than a single element's 180 deg")
    full = ula_halfpower_width_deg(n_total, spacing)
    if requested_deg < full - 1e-9:
        raise UnachievableBeamwidth(
            f"requested {requested_deg:.3f} deg is narrower than the full-aperture width {full:.3f} deg"
        )
    for n in range(1, n_total + 1):
        if ula_halfpower_width_deg(n, spacing) <= requested_deg + 1e-9:
            return n
    return n_total


def _centred_mask(n_total: int, n_active: int) -> np.ndarray:
    start = (n_total - n_active) // 2
    mask = np.zeros(n_total, dtype=bool)
    mask[start : start + n_active] = True
    return mask


def synthesize_beam(config: ArrayConfig, spec: BeamSpec, index: int = 0) -> BeamWeights:
    if spec.weights is not None:
        w = np.asarray(spec.weights, dtype=complex)
        if w.shape != (config.n_elements,):
            raise ValueError(f"explicit weights need length {config.n_elements}, got {w.shape}")
        norm = np.linalg.norm(w)
        if norm == 0:
            raise ValueError("explicit weights are all zero")
        return BeamWeights(w / norm, spec, index)

    n_rows = active_count(config.n_elev, config.d_elev, spec.elev_bw_deg)
    n_cols = active_count(config.n_az, config.d_az, spec.az_bw_deg)
    mask = np.outer(_centred_mask(config.n_az, n_cols), _centred_mask(config.n_elev, n_rows)).ravel()

    w = np.conj(steering_vector(config, 0.0, spec.etilt_deg)) * mask
    w = w / np.linalg.norm(w)
    return BeamWeights(w, spec, index)


def beam_gain_db(config: ArrayConfig, w, az_deg, elev_deg) -> np.ndarray | float:
    """Far-field power gain ``|a^T w|^2`` in dB, floored at ``GAIN_FLOOR_DB``.

    The plain transpose matches the received-power model, so a conjugate
    steering beam peaks at its own pointing direction.
    """
    weights = w.w if isinstance(w, BeamWeights) else np.asarray(w, dtype=complex)
    a = steering_vector(config, az_deg, elev_deg)
    power = np.abs(a @ weights) ** 2
    with np.errstate(divide="ignore"):
        g = 10.0 * np.log10(power)
    g = np.maximum(g, GAIN_FLOOR_DB)
    return float(g) if np.ndim(g) == 0 else g


def build_pool(config: ArrayConfig, specs: Sequence[BeamSpec]) -> BeamPool:
    if len(specs) == 0:
        raise ValueError("at least one beam spec is required")
    return BeamPool(tuple(synthesize_beam(config, s, j) for j, s in enumerate(specs)))


def spec_from_dict(d: dict) -> BeamSpec:
    weights = d.get("weights")
    if weights is not None:
        weights = tuple(complex(re, im) for re, im in weights)
    return BeamSpec(
        elev_bw_deg=float(d["elev_bw_deg"]),
        az_bw_deg=float(d["az_bw_deg"]),
        etilt_deg=float(d["etilt_deg"]),
        weights=weights,
    )


def spec_to_dict(spec: BeamSpec) -> dict:
    d = {"elev_bw_deg": spec.elev_bw_deg, "az_bw_deg": spec.az_bw_deg, "etilt_deg": spec.etilt_deg}
    if spec.weights is not None:
        d["weights"] = [[float(c.real), float(c.imag)] for c in spec.weights]
    return d


def load_pool_specs(path: str | Path) -> list[BeamSpec]:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    beams = doc["beams"] if isinstance(doc, dict) else doc
    return [spec_from_dict(b) for b in beams]


def save_pool(pool: BeamPool, path: str | Path, include_weights: bool = True) -> None:
    beams = []
    for b in pool.beams:
        d = spec_to_dict(b.spec)
        if include_weights:
            d["weights"] = [[float(c.real), float(c.imag)] for c in b.w]
        beams.append(d)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"beams": beams}, fh, sort_keys=False)
