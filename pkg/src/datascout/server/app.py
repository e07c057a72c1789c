"""Versioned HTTP+JSON API over the registry.

Endpoints (all under /v1): list/upload datasets, launch background index
builds with status polling, fetch expert bundles and blobs, and turn an
uploaded accuracy report into a recommendation. Errors are returned as
{code, message, detail}.

The request log keeps only scalar metadata and the K accuracies; no request
path can carry item-level target data, which is what keeps the client's
dataset invisible to the server.
"""

from __future__ import annotations

import argparse
import collections
import json
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..core import parse_manifest
from ..errors import (
    CorruptStoreError,
    DatascoutError,
    DuplicateNameError,
    EmptySourceError,
    InvalidBudgetError,
    LengthMismatchError,
    ManifestParseError,
    NonPositiveTemperatureError,
    NotReadyError,
    UnknownDatasetError,
)
from ..experts import KIND_ROTATION, TrainConfig
from ..fastadapt import AccuracyReport
from ..gating import GatingConfig
from ..selection import DEFAULT_TEMPERATURE
from .registry import Registry

API_VERSION = "v1"

_ERROR_STATUS = {
    ManifestParseError: (400, "invalid-manifest"),
    LengthMismatchError: (400, "length-mismatch"),
    InvalidBudgetError: (400, "invalid-budget"),
    EmptySourceError: (400, "empty-source"),
    NonPositiveTemperatureError: (400, "invalid-temperature"),
    UnknownDatasetError: (404, "unknown-dataset"),
    NotReadyError: (409, "not-ready"),
    DuplicateNameError: (409, "duplicate-name"),
    CorruptStoreError: (500, "corrupt-store"),
}


class GatingBody(BaseModel):
    K: int = 1
    scheme: str = "unsupervised"
    seed: int = 0
    max_iters: int = 100
    tol: float = 1e-6


class TrainBody(BaseModel):
    learning_rate: float = 0.1
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    weight_init_scale: float = 1.0
    hidden: int = 64


class BuildRequest(BaseModel):
    gating_cfg: GatingBody = Field(default_factory=GatingBody)
    train_cfg: TrainBody = Field(default_factory=TrainBody)
    expert_kind: str = KIND_ROTATION
    wait: bool = False


class ReportBody(BaseModel):
    dataset_ref: str
    mode: str
    z: list[float]
    target_size: int
    client_nonce: str


class RecommendRequest(BaseModel):
    report: ReportBody
    budget: int
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = 0


def _record_view(rec) -> dict:
    return {
        "dataset_id": rec.dataset_id,
        "name": rec.name,
        "status": rec.status,
        "num_items": rec.num_items,
        "feature_dim": rec.feature_dim,
        "checksum": rec.checksum,
        "K": rec.K,
        "sizes": list(rec.sizes) if rec.sizes is not None else None,
        "scheme": rec.scheme,
        "expert_kind": rec.expert_kind,
        "error": rec.error,
    }


def create_app(store_root, ui_dir=None) -> FastAPI:
    app = FastAPI(title="datascout server", version=API_VERSION)
    registry = Registry(store_root)
    app.state.registry = registry
    app.state.request_log = collections.deque(maxlen=1000)

    def log(endpoint: str, **scalars) -> None:
        app.state.request_log.append({"endpoint": endpoint, **scalars})

    @app.exception_handler(DatascoutError)
    async def on_error(request: Request, exc: DatascoutError):
        status, code = 400, "bad-request"
        for cls, (st, cd) in _ERROR_STATUS.items():
            if isinstance(exc, cls):
                status, code = st, cd
                break
        else:
            if "already running" in str(exc):
                status, code = 409, "build-in-progress"
        return JSONResponse(
            status_code=status,
            content={"code": code, "message": str(exc), "detail": type(exc).__name__},
        )

    @app.get("/v1/datasets")
    def list_datasets():
        log("list_datasets")
        return {"datasets": [_record_view(r) for r in registry.list_records()]}

    @app.post("/v1/datasets", status_code=201)
    async def upload_dataset(request: Request):
        body = (await request.body()).decode("utf-8")
        manifest = parse_manifest(body)
        if manifest.role != "source":
            return JSONResponse(
                status_code=400,
                content={
                    "code": "invalid-role",
                    "message": "only source manifests can be registered",
                    "detail": f"role={manifest.role}",
                },
            )
        dataset_id = registry.register_dataset(manifest)
        log("upload_dataset", dataset_id=dataset_id, num_items=len(manifest.items))
        return {"dataset_id": dataset_id, "status": registry.get_record(dataset_id).status}

    @app.post("/v1/datasets/{dataset_id}/build", status_code=202)
    def build_dataset(dataset_id: str, req: BuildRequest):
        gating_cfg = GatingConfig(
            K=req.gating_cfg.K,
            scheme=req.gating_cfg.scheme,
            seed=req.gating_cfg.seed,
            max_iters=req.gating_cfg.max_iters,
            tol=req.gating_cfg.tol,
        )
        train_cfg = TrainConfig(
            learning_rate=req.train_cfg.learning_rate,
            epochs=req.train_cfg.epochs,
            batch_size=req.train_cfg.batch_size,
            seed=req.train_cfg.seed,
            weight_init_scale=req.train_cfg.weight_init_scale,
            hidden=req.train_cfg.hidden,
        )
        registry.get_record(dataset_id)  # 404 before launching anything
        log("build", dataset_id=dataset_id, K=gating_cfg.K, scheme=gating_cfg.scheme)
        if req.wait:
            rec = registry.build_index(dataset_id, gating_cfg, train_cfg, req.expert_kind)
            return JSONResponse(status_code=200, content={"dataset_id": dataset_id, "status": rec.status})
        registry.build_async(dataset_id, gating_cfg, train_cfg, req.expert_kind)
        return {"dataset_id": dataset_id, "status": "building"}

    @app.get("/v1/datasets/{dataset_id}/status")
    def dataset_status(dataset_id: str):
        rec = registry.get_record(dataset_id)
        return {"dataset_id": dataset_id, "status": rec.status, "error": rec.error}

    @app.get("/v1/experts")
    def get_experts(datasets: str):
        ids = [d for d in datasets.split(",") if d]
        bundle = registry.get_experts(ids)
        log("get_experts", dataset_ref=bundle.dataset_ref, total_K=bundle.total_k)
        manifest = bundle.manifest_obj()
        for entry in manifest["experts"]:
            entry["blob_url"] = (
                f"/v1/datasets/{entry['dataset_id']}/experts/{entry['subset_index']}"
            )
        return manifest

    @app.get("/v1/datasets/{dataset_id}/experts/{subset_index}")
    def get_expert_blob(dataset_id: str, subset_index: int):
        blob = registry.expert_blob(dataset_id, subset_index)
        return Response(content=blob, media_type="application/octet-stream")

    @app.post("/v1/recommendations")
    def recommend(req: RecommendRequest):
        report = AccuracyReport(
            dataset_ref=req.report.dataset_ref,
            mode=req.report.mode,
            z=tuple(req.report.z),
            target_size=req.report.target_size,
            client_nonce=req.report.client_nonce,
        )
        log(
            "recommend",
            dataset_ref=report.dataset_ref,
            mode=report.mode,
            z=list(report.z),
            target_size=report.target_size,
            client_nonce=report.client_nonce,
            budget=req.budget,
            temperature=req.temperature,
            seed=req.seed,
        )
        rec = registry.recommend(report, req.budget, req.temperature, req.seed)
        return JSONResponse(content=json.loads(rec.to_json()))

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="datascout-server", description=__doc__)
    parser.add_argument("--store", required=True, help="registry store directory")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8008)
    parser.add_argument("--ui-dir", default=None, help="static assets to serve under /ui")
    args = parser.parse_args(argv)
    import uvicorn

    uvicorn.run(create_app(args.store, args.ui_dir), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
