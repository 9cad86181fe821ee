"""FastAPI application wrapping the experiment engine.

Requests run synchronously; a grid request returns when the grid is done.
Engine errors surface as JSON bodies ``{"detail": {"kind", "message"}}``
whose ``kind`` (config/data/training) the CLI maps onto exit codes.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, runner
from ..errors import TagprobeError
from ..formats import validate_file
from . import schemas

_STATUS_BY_KIND = {"config": 400, "data": 422, "training": 500}


def _produced_files(out_dir) -> list[str]:
    manifest = Path(out_dir) / "outputs.json"
    if not manifest.exists():
        return []
    obj = json.loads(manifest.read_text(encoding="utf-8"))
    return [entry["path"] for entry in obj.get("files", [])] + ["outputs.json"]


def _grid_config(req: schemas.GridRequest | schemas.SweepRequest, mode: str) -> runner.ExperimentConfig:
    return runner.ExperimentConfig(
        manifest=req.manifest,
        out_dir=req.out_dir,
        mode=mode,
        embedding=req.embedding,
        normalize=req.normalize,
        n_values=tuple(req.n_values) if getattr(req, "n_values", None) else None,
        k_values=tuple(req.k_values) if req.k_values else None,
        seeds=tuple(req.seeds) if req.seeds else None,
        train=req.train.to_config(),
        order_policy=req.order_policy,
        dedup=req.dedup,
        correlation=req.correlation,
        full_model=req.full_model,
        workers=req.workers,
        resume=req.resume,
        timings=req.timings,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="tagprobe",
        version=__version__,
        description="Few-shot linear-probe benchmark engine for multi-label tagging",
    )

    @app.exception_handler(TagprobeError)
    async def _engine_error(request: Request, exc: TagprobeError):
        return JSONResponse(
            status_code=_STATUS_BY_KIND.get(exc.kind, 500),
            content={"detail": {"kind": exc.kind, "message": str(exc)}},
        )

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        manifest = runner.run_synth(
            out_dir=req.out_dir,
            num_clips=req.num_clips,
            num_tags=req.num_tags,
            frame_dim=req.frame_dim,
            frames_per_clip=req.frames_per_clip,
            noise_scale=req.noise_scale,
            seed=req.seed,
            name=req.name,
        )
        return schemas.SynthResponse(
            manifest=str(manifest), files=_produced_files(req.out_dir)
        )

    @app.post("/v1/aggregate", response_model=schemas.AggregateResponse)
    def aggregate(req: schemas.AggregateRequest):
        runner.run_aggregate(req.manifest, req.out_dir, req.normalize, req.sources)
        return schemas.AggregateResponse(
            manifest=str(Path(req.out_dir) / "manifest.json"),
            files=_produced_files(req.out_dir),
        )

    @app.post("/v1/train-full", response_model=schemas.TrainFullResponse)
    def train_full(req: schemas.TrainFullRequest):
        config = runner.ExperimentConfig(
            manifest=req.manifest,
            out_dir=req.out_dir,
            mode="full",
            embedding=req.embedding,
            normalize=req.normalize,
            seed=req.seed,
            train=req.train.to_config(),
        )
        _, report = runner.run_full(config)
        payload = report.to_json()
        return schemas.TrainFullResponse(
            model_path=str(Path(req.out_dir) / f"full_{req.embedding}.fsp"),
            map=payload["map"],
            mean_auc=payload["mean_auc"],
            num_test_rows=report.num_test_rows,
            excluded_tags=len(report.excluded_tags),
            files=_produced_files(req.out_dir),
        )

    @app.post("/v1/grid", response_model=schemas.RunResponse)
    def grid(req: schemas.GridRequest):
        result = runner.run_grid(_grid_config(req, "grid"))
        return schemas.RunResponse(
            out_dir=req.out_dir, rows=len(result.rows), files=_produced_files(req.out_dir)
        )

    @app.post("/v1/sweep", response_model=schemas.RunResponse)
    def sweep(req: schemas.SweepRequest):
        result = runner.run_sweep(_grid_config(req, "sweep"))
        return schemas.RunResponse(
            out_dir=req.out_dir, rows=len(result.rows), files=_produced_files(req.out_dir)
        )

    @app.post("/v1/report", response_model=schemas.ReportResponse)
    def report(req: schemas.ReportRequest):
        result = runner.load_results(req.results)
        produced = runner.emit_report(result, req.kind, req.out_dir)
        return schemas.ReportResponse(files=[str(p) for p in produced])

    @app.post("/v1/validate", response_model=schemas.ValidateResponse)
    def validate(req: schemas.ValidateRequest):
        if not req.paths:
            return JSONResponse(
                status_code=400,
                content={"detail": {"kind": "config", "message": "no paths given"}},
            )
        reports = [validate_file(p) for p in req.paths]
        return schemas.ValidateResponse(
            ok=all(r["ok"] for r in reports), reports=reports
        )

    return app
