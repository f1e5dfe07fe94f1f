"""HTTP service exposing the experiment toolkit.

Thin wrapper: every endpoint validates its payload, calls the
corresponding core function and returns its report or manifest. Bad
inputs (config errors, malformed fronts) map to 400 with a detail string;
unexpected failures map to 500. The CLI mounts this app in-process by
default, so the same handlers serve both local and remote use.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

import mograd
from mograd.experiments import (
    ConfigError,
    compare_report,
    load_config,
    load_synth_config,
    merge_fronts,
    metrics_report,
    run_experiment,
    write_synth_data,
)
from mograd.service.models import (
    CompareRequest,
    CompareResponse,
    ExportFrontRequest,
    ExportFrontResponse,
    FrontPayload,
    HealthResponse,
    MetricsRequest,
    MetricsResponse,
    RunRequest,
    RunResponse,
    SynthDataRequest,
    SynthDataResponse,
)


def _points(front: FrontPayload) -> np.ndarray:
    pts = np.asarray(front.points, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, len(front.objectives))
    if pts.ndim != 2 or pts.shape[1] != len(front.objectives):
        raise ValueError(
            f"front {front.label!r}: points must be rows of "
            f"{len(front.objectives)} values"
        )
    return pts


def create_app() -> FastAPI:
    app = FastAPI(title="mograd", version=mograd.__version__)

    @app.exception_handler(ValueError)
    async def _bad_input(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(Exception)
    async def _server_error(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"detail": f"{type(exc).__name__}: {exc}"}
        )

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=mograd.__version__)

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        cfg = load_config(req.config)
        manifest, ok = run_experiment(cfg, jobs=req.jobs)
        return RunResponse(ok=ok, out_dir=cfg.out_dir, manifest=manifest)

    @app.post("/metrics", response_model=MetricsResponse)
    def metrics(req: MetricsRequest) -> MetricsResponse:
        front = (req.front.label, req.front.objectives, _points(req.front))
        second = None
        if req.second is not None:
            second = (req.second.label, req.second.objectives, _points(req.second))
        return MetricsResponse(report=metrics_report(front, second))

    @app.post("/compare", response_model=CompareResponse)
    def compare(req: CompareRequest) -> CompareResponse:
        report = compare_report(
            (req.vanilla.objectives, _points(req.vanilla)),
            (req.adamized.objectives, _points(req.adamized)),
        )
        return CompareResponse(report=report)

    @app.post("/export-front", response_model=ExportFrontResponse)
    def export_front(req: ExportFrontRequest) -> ExportFrontResponse:
        fronts = [(f.objectives, _points(f)) for f in req.fronts]
        names, merged = merge_fronts(fronts)
        return ExportFrontResponse(objectives=names, points=merged.tolist())

    @app.post("/synth-data", response_model=SynthDataResponse)
    def synth_data(req: SynthDataRequest) -> SynthDataResponse:
        cfg = load_synth_config(req.config)
        manifest = write_synth_data(cfg)
        return SynthDataResponse(ok=True, out_dir=cfg.out_dir, manifest=manifest)

    return app
