"""Experiment drivers: offline training, frozen-policy evaluation, dataset and oracle dumps."""

from __future__ import annotations

import io
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .channel import write_location_history, write_raytrace
from .config import ExperimentConfig, config_to_dict, dump_config
from .dqn_agent import DQNAgent, train_step_multi
from .env import BeamEnvironment
from .errors import ArchitectureMismatch
from .metrics import TRACE_COLUMNS, compute_metrics, window_metrics, write_metrics, write_trace_row
from .neural import conv_stack, mlp_stack
from .oracle import write_oracle_trace

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "sectorlearn-checkpoint/1"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_NOT_CONVERGED = 0, 1, 2, 3


@dataclass
class RunArtifacts:
    out_dir: Path
    trace_path: Path
    metrics_path: Path
    checkpoint_path: Path | None
    oracle_cache_path: Path
    config_path: Path
    summary: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.summary.get("converged"))


def _seeds(seed: int) -> dict[str, int]:
    # the environment keys its own streams off the master seed directly
    init_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return {"init": init_ss, "agent": agent_ss}


def make_agent(cfg: ExperimentConfig, n_beams, state_shape, seed: int | None = None) -> DQNAgent:
    seeds = _seeds(cfg.seed if seed is None else seed)
    net = cfg.network
    if net.architecture == "conv":
        def layers_for(J):
            return conv_stack(J, [tuple(s) for s in net.conv_strides])
    else:
        def layers_for(J):
            return mlp_stack(J, net.mlp_hidden)
    return DQNAgent(
        n_beams, state_shape, layers_for, cfg.agent.agent_config(),
        init_rng=np.random.default_rng(seeds["init"]), rng=np.random.default_rng(seeds["agent"]),
        dtype=np.float32 if net.precision == "float32" else np.float64,
    )


def make_env(cfg: ExperimentConfig) -> BeamEnvironment:
    return BeamEnvironment(cfg)


# ---------------------------------------------------------------- checkpoints


def _write_npz(path: Path, arrays: dict[str, np.ndarray]) -> None:
    """npz writer with fixed zip timestamps so equal contents give equal bytes."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def _json_array(obj) -> np.ndarray:
    return np.frombuffer(json.dumps(obj, sort_keys=True).encode("utf-8"), dtype=np.uint8)


def _trace_arrays(trace: dict, scenario_ids: list[str], n_sectors: int) -> dict[str, np.ndarray]:
    n = len(trace["reward"])
    return {
        "trace/step": np.asarray(trace["step"], dtype="<i8"),
        "trace/scenario": np.asarray([scenario_ids.index(s) for s in trace["scenario_id"]], dtype="<i8"),
        "trace/epsilon": np.asarray(trace["epsilon"], dtype="<f8"),
        "trace/actions": np.asarray(trace["actions"], dtype="<i8").reshape(n, n_sectors),
        "trace/reward": np.asarray(trace["reward"], dtype="<i8"),
        "trace/oracle_reward": np.asarray(trace["oracle_reward"], dtype="<i8"),
        "trace/oracle_actions": np.asarray(trace["oracle_actions"], dtype="<i8").reshape(n, n_sectors),
    }


def save_checkpoint(path: Path, cfg: ExperimentConfig, agent: DQNAgent, env: BeamEnvironment,
                    trace: dict, scenario_ids: list[str], include_buffers: bool = True) -> None:
    meta = {
        "format": CHECKPOINT_FORMAT,
        "byte_order": "little",
        "layout": "C",
        "global_step": agent.step,
        "agent_rng": agent.rng.bit_generator.state,
        "env": env.get_state(),
        "scenario_ids": scenario_ids,
        "architecture": [net.architecture() for net in agent.eval_nets],
        "config": config_to_dict(cfg),
    }
    arrays = agent.to_arrays(include_buffers)
    arrays["env/history"] = env.history_array()
    arrays.update(_trace_arrays(trace, scenario_ids, agent.n_sectors))
    arrays["meta"] = _json_array(meta)
    _write_npz(Path(path), arrays)


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with np.load(path, allow_pickle=False) as data:
        arrays = {k: data[k] for k in data.files}
    meta = json.loads(bytes(arrays.pop("meta")).decode("utf-8"))
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    return meta, arrays


def _check_architecture(meta: dict, agent: DQNAgent) -> None:
    mine = [net.architecture() for net in agent.eval_nets]
    if meta["architecture"] != mine:
        raise ArchitectureMismatch("checkpoint architecture does not match the configured network")


def _empty_trace() -> dict:
    return {c: [] for c in TRACE_COLUMNS}


def _restore_trace(arrays, scenario_ids: list[str]) -> dict:
    t = _empty_trace()
    t["step"] = [int(x) for x in arrays["trace/step"]]
    t["scenario_id"] = [scenario_ids[i] for i in arrays["trace/scenario"]]
    t["epsilon"] = [float(x) for x in arrays["trace/epsilon"]]
    t["actions"] = [tuple(int(a) for a in row) for row in arrays["trace/actions"]]
    t["reward"] = [int(x) for x in arrays["trace/reward"]]
    t["oracle_reward"] = [int(x) for x in arrays["trace/oracle_reward"]]
    t["oracle_actions"] = [tuple(int(a) for a in row) for row in arrays["trace/oracle_actions"]]
    return t


def _scenario_ids(cfg: ExperimentConfig, env: BeamEnvironment) -> list[str]:
    if env._file_snapshots is not None:
        return sorted({s.scenario_id for s in env._file_snapshots})
    return [s.id for s in cfg.scenarios]


# ---------------------------------------------------------------- drivers


def _write_oracle_cache(env: BeamEnvironment, dest) -> None:
    dest.write("scenario_id,draw,best_assignment,best_reward,unique\n")
    for key, e in sorted(env.oracle_cache().items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        uniq = "" if e.unique_optimum is None else int(e.unique_optimum)
        dest.write(f"{e.snapshot.scenario_id},{key[1]},{'|'.join(map(str, e.oracle.best_assignment))},"
                   f"{e.oracle.best_reward},{uniq}\n")


def run_offline_training(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    resume: str | Path | None = None,
    progress: Callable[[int, dict], None] | None = None,
) -> RunArtifacts:
    """Train until the last full window has zero action mismatch or the step budget runs out."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    arts = RunArtifacts(out, out / "trace.csv", out / "metrics.csv", None,
                        out / "oracle_cache.csv", out / "config.resolved.yaml")
    dump_config(cfg, arts.config_path)

    env = make_env(cfg)
    agent = make_agent(cfg, env.n_beams, env.state_shape)
    scenario_ids = _scenario_ids(cfg, env)
    trace = _empty_trace()
    if resume is not None:
        meta, arrays = read_checkpoint(resume)
        _check_architecture(meta, agent)
        agent.load_arrays(arrays)
        agent.rng.bit_generator.state = meta["agent_rng"]
        env.set_state(meta["env"], arrays["env/history"])
        trace = _restore_trace(arrays, meta["scenario_ids"])

    total = cfg.training.episodes * cfg.training.steps_per_episode
    window = cfg.training.window
    converged = False
    last = None
    state = env.state()
    try:
        with open(arts.trace_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(len(trace["step"])):
                write_trace_row(fh, *(trace[c][i] for c in TRACE_COLUMNS))
            for t in range(agent.step, total):
                res = train_step_multi(agent, state, env.step)
                state = res.next_state
                info = res.info
                row = (t, info["scenario_id"], res.epsilon, res.actions, res.reward,
                       info["oracle_reward"], info["oracle_actions"])
                for c, v in zip(TRACE_COLUMNS, row):
                    trace[c].append(v)
                write_trace_row(fh, *row)
                if (t + 1) % window == 0:
                    last = window_metrics(trace, t + 1 - window, t + 1)
                    if progress is not None:
                        progress(t + 1, {"epsilon": res.epsilon, "asd": last.asd, "am": last.am_joint})
                    if last.am_joint == 0.0:
                        converged = True
                        if cfg.training.stop_on_convergence:
                            break
                    else:
                        converged = False
                every = cfg.training.checkpoint_every
                if every and (t + 1) % every == 0:
                    save_checkpoint(out / f"checkpoint_{t + 1}.npz", cfg, agent, env, trace, scenario_ids)
    except Exception as exc:
        (out / "error.json").write_text(json.dumps({"step": agent.step, "error": repr(exc)}) + "\n")
        raise

    rows = compute_metrics(trace, window)
    with open(arts.metrics_path, "w", encoding="utf-8") as fh:
        write_metrics(rows, cfg.n_sectors, fh)
    if agent.step > 0:
        # a null run (zero budget) leaves just the resolved config and empty tables
        with open(arts.oracle_cache_path, "w", encoding="utf-8") as fh:
            _write_oracle_cache(env, fh)
        arts.checkpoint_path = out / "checkpoint.npz"
        save_checkpoint(arts.checkpoint_path, cfg, agent, env, trace, scenario_ids)

    arts.summary = {
        "steps": agent.step,
        "converged": converged,
        "final_window": None if not rows else {
            "window_start": rows[-1].window_start, "asd": rows[-1].asd, "am_joint": rows[-1].am_joint,
            "am_sector": rows[-1].am_sector, "am_receq_sector": rows[-1].am_receq_sector,
        },
        "unique_optima": all(e.unique_optimum for e in env.oracle_cache().values())
        if env.oracle_cache() else None,
        "total_network_outputs": agent.total_outputs,
        "n_networks": agent.n_sectors,
    }
    if agent.step > 0:
        (out / "summary.json").write_text(json.dumps(arts.summary, indent=2, sort_keys=True) + "\n")
    return arts


def load_agent(cfg: ExperimentConfig, checkpoint, env: BeamEnvironment | None = None) -> DQNAgent:
    env = env or make_env(cfg)
    agent = make_agent(cfg, env.n_beams, env.state_shape)
    meta, arrays = read_checkpoint(checkpoint)
    _check_architecture(meta, agent)
    agent.load_arrays(arrays, load_optimizer=False)
    return agent


def rollout(cfg: ExperimentConfig, agent: DQNAgent, steps: int, env: BeamEnvironment | None = None) -> dict:
    """Greedy (epsilon = 0) rollout without learning; returns the trace dict."""
    env = env or make_env(cfg)
    state = env.reset()
    trace = _empty_trace()
    for t in range(steps):
        actions = agent.greedy_actions(state)
        reward, state, _, info = env.step(actions)
        for c, v in zip(TRACE_COLUMNS, (t, info["scenario_id"], 0.0, actions, reward,
                                        info["oracle_reward"], info["oracle_actions"])):
            trace[c].append(v)
    return trace


def run_eval(cfg: ExperimentConfig, checkpoint, steps: int = 1000, out_dir: str | Path | None = None) -> dict:
    env = make_env(cfg)
    agent = load_agent(cfg, checkpoint, env)
    trace = rollout(cfg, agent, steps, env)
    whole = window_metrics(trace, 0, steps)
    result = {"steps": steps, "asd": whole.asd, "am_joint": whole.am_joint,
              "am_sector": whole.am_sector, "am_receq_sector": whole.am_receq_sector}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "eval_trace.csv", "w", encoding="utf-8") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(steps):
                write_trace_row(fh, *(trace[c][i] for c in TRACE_COLUMNS))
        with open(out / "eval_metrics.csv", "w", encoding="utf-8") as fh:
            write_metrics(compute_metrics(trace, min(cfg.training.window, steps)), cfg.n_sectors, fh)
        (out / "eval_summary.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return result


def gen_dataset(cfg: ExperimentConfig, out: str | Path, horizon: int) -> Path:
    """Write the scenario-specific snapshots of ``horizon`` steps in ray-trace format.

    A UE location-history file is written next to it (``<stem>_locations.csv``).
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    env = make_env(cfg)
    snaps = []
    for t in range(horizon):
        key = env.current_key()
        snap = env.make_snapshot(key, timestamp=t)
        snaps.append(snap)
        env._advance()
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_raytrace(snaps, fh, n_sectors=cfg.n_sectors)
    loc_path = out.with_name(out.stem + "_locations.csv")
    with open(loc_path, "w", encoding="utf-8", newline="") as fh:
        write_location_history(
            ((s.timestamp, k, *p) for s in snaps for k, p in enumerate(s.ue_positions)), fh)
    return out


def oracle_trace(cfg: ExperimentConfig, steps: int) -> list[tuple]:
    env = make_env(cfg)
    rows = []
    for t in range(steps):
        e = env.entry(env.current_key())
        rows.append((t, env.scenario_id(), e.oracle.best_assignment, e.oracle.best_reward))
        env._advance()
    return rows


def write_oracle_file(cfg: ExperimentConfig, steps: int, path: str | Path) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        write_oracle_trace(oracle_trace(cfg, steps), fh)
    return Path(path)
