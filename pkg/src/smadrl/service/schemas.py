"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..config import ConfigDocument


class HealthResponse(BaseModel):
    status: str
    version: str


class TrainRequest(BaseModel):
    config: ConfigDocument
    seed: int = Field(0, ge=0)
    out_dir: str


class TrainResponse(BaseModel):
    job_id: str


class JobStatusResponse(BaseModel):
    job_id: str
    state: Literal["queued", "running", "done", "failed"]
    detail: str | None = None
    artifacts: dict[str, str] = Field(default_factory=dict)


class EvalRequest(BaseModel):
    checkpoint: str
    episodes: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)
    out_dir: str | None = None
    trace_path: str | None = None


class EpisodeMetricsModel(BaseModel):
    episode: int
    total_pellets: int
    workload: list[int]
    gini: float
    collisions: int
    clog_events: int
    oat_fraction: float
    bb_fraction: float


class EvalResponse(BaseModel):
    episodes: list[EpisodeMetricsModel]
    total_pellets: int
    artifacts: dict[str, str] = Field(default_factory=dict)


class WorkloadRequest(BaseModel):
    workload: list[int] = Field(min_length=1)


class WorkloadResponse(BaseModel):
    gini: float | None
    degenerate: bool
    lorenz_points: list[tuple[float, float]]


class TraceAnalysisRequest(BaseModel):
    trace_path: str
    clog_window: int = Field(200, ge=1)


class TraceAnalysisResponse(BaseModel):
    episodes: list[EpisodeMetricsModel]
    total_pellets: int
