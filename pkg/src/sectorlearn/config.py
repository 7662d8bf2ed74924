"""Experiment configuration: nested dataclasses loaded from / dumped to YAML."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .array_beams import ArrayConfig, BeamSpec, spec_from_dict, spec_to_dict
from .channel import SectorSite, SynthChannelParams
from .coverage import RadioConstants
from .dqn_agent import AgentConfig, EpsilonSchedule
from .errors import ConfigError
from .mobility import CellExtent, MarkovSchedule, PeriodicSchedule, ScenarioDef

# Where each default comes from: "published" values are the published simulation
# parameters, everything else was chosen for this implementation.
PROVENANCE = {
    "array.n_elev": "published", "array.n_az": "published", "array.d_elev": "published", "array.d_az": "published",
    "array.height_m": "published",
    "radio.noise_power_dbm": "published", "radio.sinr_threshold_db": "published", "radio.tx_power_dbm": "implementation",
    "agent.gamma": "published", "agent.learning_rate": "published", "agent.batch_size": "published",
    "agent.eps_max": "published", "agent.eps_min": "published", "agent.eps_decay": "implementation",
    "agent.replay_capacity": "implementation", "agent.target_sync_steps": "implementation",
    "agent.double_dqn": "published", "agent.shared_exploration": "published",
    "network.architecture": "published", "network.frame_cols": "published", "network.n_frames": "published",
    "network.conv_strides": "implementation", "network.mlp_hidden": "implementation",
    "network.precision": "implementation",
    "mobility.period_steps": "published",
    "training.window": "published", "training.steps_per_episode": "implementation",
    "training.episodes": "implementation", "training.stop_on_convergence": "implementation",
    "snapshot_mode": "implementation", "n_ues": "implementation", "cell": "implementation",
    "channel": "implementation", "beam_pool": "implementation", "sectors": "implementation",
}


@dataclass
class MobilityConfig:
    kind: str = "periodic"  # periodic | markov
    period_steps: int = 8
    cycle: list[str] = field(default_factory=list)
    states: list[str] = field(default_factory=list)
    transition: list[list[float]] = field(default_factory=list)
    initial: str | None = None

    def schedule(self) -> PeriodicSchedule | MarkovSchedule:
        if self.kind == "periodic":
            return PeriodicSchedule(self.period_steps, tuple(self.cycle))
        if self.kind == "markov":
            initial = self.initial if self.initial is not None else self.states[0]
            return MarkovSchedule(tuple(self.states), tuple(tuple(map(float, r)) for r in self.transition), initial)
        raise ConfigError(f"unknown mobility kind {self.kind!r}")

    def scenario_ids(self) -> list[str]:
        return list(self.cycle) if self.kind == "periodic" else list(self.states)


@dataclass
class ChannelConfig:
    source: str = "synthetic"  # synthetic | raytrace
    raytrace_path: str | None = None
    params: SynthChannelParams = field(default_factory=SynthChannelParams)


@dataclass
class AgentSettings:
    gamma: float = 1e-4
    learning_rate: float = 1e-3
    batch_size: int = 32
    replay_capacity: int = 10_000
    target_sync_steps: int = 100
    double_dqn: bool = True
    shared_exploration: bool = True
    eps_max: float = 1.0
    eps_min: float = 1e-6
    eps_decay: float = 5e-4

    def agent_config(self) -> AgentConfig:
        return AgentConfig(
            gamma=self.gamma, learning_rate=self.learning_rate, batch_size=self.batch_size,
            replay_capacity=self.replay_capacity, target_sync_steps=self.target_sync_steps,
            double_dqn=self.double_dqn, shared_exploration=self.shared_exploration,
            epsilon=EpsilonSchedule(self.eps_max, self.eps_min, self.eps_decay),
        )


@dataclass
class NetworkSettings:
    architecture: str = "conv"  # conv | mlp
    frame_cols: int = 100
    n_frames: int = 4
    conv_strides: list[list[int]] = field(default_factory=lambda: [[4, 4], [2, 2], [1, 1]])
    mlp_hidden: list[int] = field(default_factory=lambda: [64, 64])
    precision: str = "float64"  # float64 | float32


@dataclass
class TrainingSettings:
    episodes: int = 100
    steps_per_episode: int = 200
    window: int = 200
    stop_on_convergence: bool = True
    checkpoint_every: int = 0
    initial_beams: list[int] | None = None


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    array: ArrayConfig = field(default_factory=ArrayConfig)
    sectors: list[SectorSite] = field(default_factory=lambda: [SectorSite(0.0, 0.0, 35.0)])
    beam_pool: list[BeamSpec] = field(default_factory=list)
    sector_pools: list[list[BeamSpec]] | None = None
    radio: RadioConstants = field(default_factory=RadioConstants)
    n_ues: int = 100
    cell: CellExtent = field(default_factory=CellExtent)
    scenarios: list[ScenarioDef] = field(default_factory=list)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    snapshot_mode: str = "scenario"  # scenario | change | step
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    agent: AgentSettings = field(default_factory=AgentSettings)
    network: NetworkSettings = field(default_factory=NetworkSettings)
    training: TrainingSettings = field(default_factory=TrainingSettings)
    output_dir: str = "runs/experiment"

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    def pool_specs(self) -> list[list[BeamSpec]]:
        if self.sector_pools is not None:
            return self.sector_pools
        return [self.beam_pool] * self.n_sectors

    def scenario(self, sid: str) -> ScenarioDef:
        for s in self.scenarios:
            if s.id == sid:
                return s
        raise ConfigError(f"unknown scenario {sid!r}")

    def validate(self) -> "ExperimentConfig":
        if self.n_sectors < 1:
            raise ConfigError("at least one sector is required")
        pools = self.pool_specs()
        if len(pools) != self.n_sectors:
            raise ConfigError(f"{len(pools)} beam pools for {self.n_sectors} sectors")
        if any(len(p) == 0 for p in pools):
            raise ConfigError("every sector needs a non-empty beam pool")
        if self.n_ues < 1:
            raise ConfigError("n_ues must be >= 1")
        if self.snapshot_mode not in ("scenario", "change", "step"):
            raise ConfigError(f"unknown snapshot_mode {self.snapshot_mode!r}")
        if self.network.architecture not in ("conv", "mlp"):
            raise ConfigError(f"unknown architecture {self.network.architecture!r}")
        if self.network.precision not in ("float64", "float32"):
            raise ConfigError(f"unknown precision {self.network.precision!r}")
        if self.channel.source not in ("synthetic", "raytrace"):
            raise ConfigError(f"unknown channel source {self.channel.source!r}")
        if self.channel.source == "raytrace" and not self.channel.raytrace_path:
            raise ConfigError("channel.raytrace_path is required for a raytrace source")
        if self.channel.source == "synthetic":
            known = {s.id for s in self.scenarios}
            missing = [s for s in self.mobility.scenario_ids() if s not in known]
            if missing:
                raise ConfigError(f"mobility refers to undefined scenarios {missing}")
            try:
                self.mobility.schedule()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        init = self.training.initial_beams
        if init is not None:
            if len(init) != self.n_sectors or any(not 0 <= j < len(p) for j, p in zip(init, pools)):
                raise ConfigError("training.initial_beams must give one valid beam per sector")
        if self.training.window < 1 or self.training.steps_per_episode < 1 or self.training.episodes < 0:
            raise ConfigError("training window/steps must be >= 1 and episodes >= 0")
        return self


# ---------------------------------------------------------------- (de)serialisation


def _build(cls, data: dict | None, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kinds = {f.name: f.type for f in dataclasses.fields(cls)}
    data = {k: _coerce(v, kinds[k], f"{where}.{k}") for k, v in data.items()}
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _coerce(value, kind, where: str):
    # YAML 1.1 reads exponent floats without a sign ("2e9") as strings
    if isinstance(value, str) and kind in ("float", "int"):
        try:
            return float(value) if kind == "float" else int(value)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    return value


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d or {})
    d.pop("_provenance", None)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    try:
        cfg = ExperimentConfig(
            name=str(d.get("name", "experiment")),
            seed=int(d.get("seed", 0)),
            array=_build(ArrayConfig, d.get("array"), "array"),
            sectors=[_build(SectorSite, s, "sectors") for s in d.get("sectors", [{"x": 0, "y": 0, "z": 35}])],
            beam_pool=[spec_from_dict(b) for b in d.get("beam_pool", [])],
            sector_pools=None if d.get("sector_pools") is None
            else [[spec_from_dict(b) for b in pool] for pool in d["sector_pools"]],
            radio=_build(RadioConstants, d.get("radio"), "radio"),
            n_ues=int(d.get("n_ues", 100)),
            cell=_build(CellExtent, d.get("cell"), "cell"),
            scenarios=[_build(ScenarioDef, s, "scenarios") for s in d.get("scenarios", [])],
            mobility=_build(MobilityConfig, d.get("mobility"), "mobility"),
            snapshot_mode=str(d.get("snapshot_mode", "scenario")),
            channel=_channel_from_dict(d.get("channel")),
            agent=_build(AgentSettings, d.get("agent"), "agent"),
            network=_build(NetworkSettings, d.get("network"), "network"),
            training=_build(TrainingSettings, d.get("training"), "training"),
            output_dir=str(d.get("output_dir", "runs/experiment")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def _channel_from_dict(d: dict | None) -> ChannelConfig:
    if d is None:
        return ChannelConfig()
    d = dict(d)
    params = _build(SynthChannelParams, d.pop("params", None), "channel.params")
    cc = _build(ChannelConfig, d, "channel")
    cc.params = params
    return cc


def config_to_dict(cfg: ExperimentConfig, with_provenance: bool = True) -> dict[str, Any]:
    d = dataclasses.asdict(cfg)
    d["beam_pool"] = [spec_to_dict(b) for b in cfg.beam_pool]
    if cfg.sector_pools is not None:
        d["sector_pools"] = [[spec_to_dict(b) for b in pool] for pool in cfg.sector_pools]
    d["array"] = dataclasses.asdict(cfg.array)
    if with_provenance:
        d["_provenance"] = dict(PROVENANCE)
    return _plain(d)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)
