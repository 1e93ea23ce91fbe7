"""HTTP service wrapping the workbench.

Training runs as a background job (it can take minutes); evaluation and
analysis answer synchronously. The CLI covers the same operations for
batch use; this service exists for long-lived, multi-client setups.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__, analysis, harness
from ..checkpoint import load_checkpoint, save_checkpoint
from ..errors import CheckpointError, ConfigError
from ..traces import read_trace, write_trace
from .schemas import (
    EpisodeMetricsModel,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    JobStatusResponse,
    TraceAnalysisRequest,
    TraceAnalysisResponse,
    TrainRequest,
    TrainResponse,
    WorkloadRequest,
    WorkloadResponse,
)


@dataclass
class Job:
    job_id: str
    state: str = "queued"
    detail: str | None = None
    artifacts: dict[str, str] = field(default_factory=dict)


class JobRegistry:
    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def create(self) -> Job:
        job = Job(job_id=uuid.uuid4().hex)
        with self._lock:
            self._jobs[job.job_id] = job
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def update(self, job_id: str, **changes) -> None:
        with self._lock:
            job = self._jobs[job_id]
            for key, value in changes.items():
                setattr(job, key, value)


def _metrics_model(m: analysis.EpisodeMetrics) -> EpisodeMetricsModel:
    return EpisodeMetricsModel(
        episode=m.episode,
        total_pellets=m.total_pellets,
        workload=m.workload,
        gini=m.gini,
        collisions=m.collisions,
        clog_events=m.clog_events,
        oat_fraction=m.oat_fraction,
        bb_fraction=m.bb_fraction,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="smadrl", version=__version__)
    jobs = JobRegistry()

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/train", response_model=TrainResponse)
    def train(request: TrainRequest) -> TrainResponse:
        job = jobs.create()

        def run() -> None:
            jobs.update(job.job_id, state="running")
            try:
                seed_dir = Path(request.out_dir) / f"seed_{request.seed}"
                seed_dir.mkdir(parents=True, exist_ok=True)
                result = harness.run_training(request.config, request.seed)
                save_checkpoint(seed_dir / "checkpoint.bin", result.state)
                harness.write_train_log(
                    result.log, seed_dir / "train_log.csv", {"seed": request.seed}
                )
                jobs.update(
                    job.job_id,
                    state="done",
                    artifacts={
                        "checkpoint": str(seed_dir / "checkpoint.bin"),
                        "train_log": str(seed_dir / "train_log.csv"),
                    },
                )
            except Exception as exc:  # any failure must surface in the job state
                jobs.update(job.job_id, state="failed", detail=f"{type(exc).__name__}: {exc}")

        threading.Thread(target=run, daemon=True).start()
        return TrainResponse(job_id=job.job_id)

    @app.get("/jobs/{job_id}", response_model=JobStatusResponse)
    def job_status(job_id: str) -> JobStatusResponse:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return JobStatusResponse(
            job_id=job.job_id, state=job.state, detail=job.detail, artifacts=job.artifacts
        )

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(request: EvalRequest) -> EvalResponse:
        try:
            state = load_checkpoint(request.checkpoint)
            metrics, trace = harness.evaluate(
                state,
                episodes=request.episodes,
                seed=request.seed,
                collect_trace=request.trace_path is not None,
            )
        except CheckpointError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        artifacts: dict[str, str] = {}
        if request.out_dir is not None:
            out_dir = Path(request.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            analysis.write_reports(
                metrics, len(state.agents), out_dir / "metrics.csv", out_dir / "lorenz.json"
            )
            artifacts["metrics"] = str(out_dir / "metrics.csv")
            artifacts["lorenz"] = str(out_dir / "lorenz.json")
        if trace is not None and request.trace_path is not None:
            write_trace(trace, request.trace_path)
            artifacts["trace"] = request.trace_path
        return EvalResponse(
            episodes=[_metrics_model(m) for m in metrics],
            total_pellets=sum(m.total_pellets for m in metrics),
            artifacts=artifacts,
        )

    @app.post("/analysis/workload", response_model=WorkloadResponse)
    def workload(request: WorkloadRequest) -> WorkloadResponse:
        if any(v < 0 for v in request.workload):
            raise HTTPException(status_code=422, detail="workload entries must be nonnegative")
        curve = analysis.lorenz_points(request.workload)
        value = None if curve.degenerate else analysis.gini(request.workload)
        return WorkloadResponse(
            gini=value, degenerate=curve.degenerate, lorenz_points=list(curve.points)
        )

    @app.post("/analysis/trace", response_model=TraceAnalysisResponse)
    def analyze_trace(request: TraceAnalysisRequest) -> TraceAnalysisResponse:
        try:
            trace = read_trace(request.trace_path)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        metrics = analysis.metrics_from_trace(trace, clog_window=request.clog_window)
        return TraceAnalysisResponse(
            episodes=[_metrics_model(m) for m in metrics],
            total_pellets=sum(m.total_pellets for m in metrics),
        )

    return app
