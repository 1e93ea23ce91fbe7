"""Experiment configuration: JSON document schema and runtime builders.

The document is strict: unknown keys are rejected with their path.
Defaults are the training defaults used throughout (learning rate 1e-4,
discount 0.99, batch 64, epsilon 1.0 -> 0.02 over the first 10% of
training, 5000-step episodes, reward weights 0.2/0.2/0.2/0.4).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .agent import LearnerConfig
from .env import EnvConfig, RewardConfig, RewardMode
from .errors import ConfigError
from .layout import build_arena
from .pheromone import PheromoneParams

Method = Literal["IQL", "IQL_G", "IQL_GS", "IQL_GSC"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RewardSection(_Strict):
    r_distance: float = 2.5
    r_collision: float = -2.0
    r_pickup: float = 50.0
    r_trip: float = 50.0
    w_distance: float = Field(0.2, gt=0)
    w_collision: float = Field(0.2, gt=0)
    w_pickup: float = Field(0.2, gt=0)
    w_trip: float = Field(0.4, gt=0)


class EnvSection(_Strict):
    chamber_width: int = Field(6, ge=1)
    chamber_height: int = Field(5, ge=1)
    tunnel_length: int = Field(8, ge=1)
    num_agents: int = Field(2, ge=1)
    episode_length: int = Field(5000, ge=1)
    observation_radius: int = Field(1, ge=1)
    dig_duration: int = Field(1, ge=1)
    reward: RewardSection = RewardSection()


class LearnerSection(_Strict):
    learning_rate: float = Field(1e-4, gt=0)
    gamma: float = Field(0.99, ge=0, le=1)
    batch_size: int = Field(64, ge=1)
    buffer_capacity: int = Field(100_000, ge=1)
    target_sync_interval: int = Field(1000, ge=1)
    learn_start: int = Field(1000, ge=1)
    update_interval: int = Field(1, ge=1)
    epsilon_start: float = Field(1.0, ge=0, le=1)
    epsilon_end: float = Field(0.02, ge=0, le=1)
    epsilon_fraction: float = Field(0.10, ge=0, le=1)


class PheromoneSection(_Strict):
    rho0: float = Field(1.0, gt=0)
    alpha: float = Field(0.1, gt=0, lt=1)
    beta: float = Field(0.05, ge=0)


class CurriculumSection(_Strict):
    phase_episodes: int = Field(200, ge=1)


class RunSection(_Strict):
    episodes: int = Field(200, ge=1)
    seeds: list[Annotated[int, Field(ge=0)]] = Field(default_factory=lambda: [0])
    output_dir: str = "runs"


class ConfigDocument(_Strict):
    method: Method = "IQL"
    env: EnvSection = EnvSection()
    learner: LearnerSection = LearnerSection()
    pheromone: PheromoneSection = PheromoneSection()
    curriculum: CurriculumSection = CurriculumSection()
    run: RunSection = RunSection()

    @property
    def reward_mode(self) -> RewardMode:
        return RewardMode.LOCAL if self.method == "IQL" else RewardMode.GLOBAL

    @property
    def stigmergy_enabled(self) -> bool:
        return self.method in ("IQL_GS", "IQL_GSC")

    @property
    def curriculum_enabled(self) -> bool:
        return self.method == "IQL_GSC"

    def canonical_dict(self) -> dict:
        return json.loads(self.model_dump_json())


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            lines.append(f"unknown key: {loc}")
        else:
            lines.append(f"{loc}: {err['msg']}")
    return "invalid configuration: " + "; ".join(lines)


def parse_config(data: dict) -> ConfigDocument:
    try:
        return ConfigDocument.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def load_config(path: str | Path) -> ConfigDocument:
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return parse_config(data)


def build_env_config(doc: ConfigDocument, num_agents: int | None = None, seed: int = 0) -> EnvConfig:
    """Concrete environment config for one rollout (team size may be overridden
    by the curriculum)."""
    env = doc.env
    layout = build_arena(env.chamber_width, env.chamber_height, env.tunnel_length)
    reward = RewardConfig(
        r_distance=env.reward.r_distance,
        r_collision=env.reward.r_collision,
        r_pickup=env.reward.r_pickup,
        r_trip=env.reward.r_trip,
        w_distance=env.reward.w_distance,
        w_collision=env.reward.w_collision,
        w_pickup=env.reward.w_pickup,
        w_trip=env.reward.w_trip,
        mode=doc.reward_mode,
    )
    return EnvConfig(
        layout=layout,
        num_agents=env.num_agents if num_agents is None else num_agents,
        episode_length=env.episode_length,
        seed=seed,
        reward=reward,
        pheromone=PheromoneParams(
            rho0=doc.pheromone.rho0, alpha=doc.pheromone.alpha, beta=doc.pheromone.beta
        ),
        observation_radius=env.observation_radius,
        stigmergy_enabled=doc.stigmergy_enabled,
        dig_duration=env.dig_duration,
    )


def build_learner_config(doc: ConfigDocument) -> LearnerConfig:
    l = doc.learner
    return LearnerConfig(
        learning_rate=l.learning_rate,
        gamma=l.gamma,
        batch_size=l.batch_size,
        buffer_capacity=l.buffer_capacity,
        target_sync_interval=l.target_sync_interval,
        learn_start=l.learn_start,
        update_interval=l.update_interval,
        epsilon_start=l.epsilon_start,
        epsilon_end=l.epsilon_end,
        epsilon_fraction=l.epsilon_fraction,
    )
