"""Broadcast-beam sectorization of MIMO cells with deep Q-learning agents."""

from .array_beams import ArrayConfig, BeamPool, BeamSpec, BeamWeights, build_pool, synthesize_beam
from .config import ExperimentConfig, load_config
from .coverage import RadioConstants, evaluate
from .dqn_agent import DQNAgent
from .env import BeamEnvironment
from .harness import run_eval, run_offline_training
from .oracle import exhaustive_best

__all__ = [
    "ArrayConfig", "BeamPool", "BeamSpec", "BeamWeights", "build_pool", "synthesize_beam",
    "ExperimentConfig", "load_config", "RadioConstants", "evaluate", "DQNAgent", "BeamEnvironment",
    "run_eval", "run_offline_training", "exhaustive_best",
]
__version__ = "0.1.0"
