"""Stigmergic multi-agent RL workbench.

A grid-world collective excavation simulator with a digital-pheromone
communication layer, independent deep-Q learners, a curriculum training
scheduler, and workload/congestion analysis tools.
"""

__version__ = "0.1.0"

from .agent import DQNAgent, EpsilonSchedule, LearnerConfig, ReplayBuffer
from .analysis import EpisodeMetrics, LorenzCurve, gini, lorenz_points
from .config import ConfigDocument, load_config, parse_config
from .env import Action, AgentMode, EnvConfig, ExcavationEnv, RewardConfig, StepResult
from .errors import CheckpointError, ConfigError, DivergenceError
from .harness import evaluate, run_training
from .layout import GridLayout, build_arena, distance_field
from .pheromone import PheromoneMap, PheromoneParams, tunnel_density

__all__ = [
    "Action",
    "AgentMode",
    "CheckpointError",
    "ConfigDocument",
    "ConfigError",
    "DQNAgent",
    "DivergenceError",
    "EnvConfig",
    "EpisodeMetrics",
    "EpsilonSchedule",
    "ExcavationEnv",
    "GridLayout",
    "LearnerConfig",
    "LorenzCurve",
    "PheromoneMap",
    "PheromoneParams",
    "ReplayBuffer",
    "RewardConfig",
    "StepResult",
    "build_arena",
    "distance_field",
    "evaluate",
    "gini",
    "load_config",
    "lorenz_points",
    "parse_config",
    "run_training",
    "tunnel_density",
    "__version__",
]
