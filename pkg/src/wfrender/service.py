"""HTTP inference service.

Routes (all under /v1):
  GET  /v1/health      liveness + model version
  GET  /v1/model-info  config echo for the loaded checkpoint
  POST /v1/render      wireframe JSON (+ optional color guidance) -> PNG pair
  POST /v1/histogram   image upload -> 256x3 color histogram JSON

Weights are loaded once per process and only ever read; request handling is
concurrent over the immutable model with a bounded in-flight gate.
"""

from __future__ import annotations

import base64
import io
import os
import threading
import time
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request, UploadFile
from pydantic import BaseModel

from . import __version__
from .training import load_model
from .wireframe import WireframeError, color_histogram, parse_wireframe, rasterize

MAX_PAYLOAD_BYTES = 8 * 1024 * 1024
CHECKPOINT_ENV = "WR_CHECKPOINT"


class RenderRequest(BaseModel):
    wireframe: dict
    histogram: list[list[float]] | None = None
    reference_image_b64: str | None = None
    checkpoint_id: str | None = None


class RenderResponse(BaseModel):
    scene: str  # base64 PNG
    reconstructed_wireframe: str  # base64 PNG
    latency_ms: float
    model_version: str


def _png_b64(img: np.ndarray) -> str:
    """Encode an (H, W, C) [-1, 1] array as base64 PNG."""
    from PIL import Image

    arr = ((img.astype(np.float64) + 1.0) / 2.0 * 255.0).round().clip(0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _decode_image_bytes(data: bytes) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(io.BytesIO(data)) as pil:
            return np.asarray(pil.convert("RGB")).astype(np.float32) / 255.0 * 2.0 - 1.0
    except Exception as e:
        raise HTTPException(status_code=422, detail=f"cannot decode image: {e}") from e


def _validate_histogram(rows: list[list[float]]) -> np.ndarray:
    hist = np.asarray(rows, dtype=np.float64)
    if hist.shape != (256, 3):
        raise HTTPException(status_code=422, detail=f"histogram must be 256x3, got {hist.shape}")
    if (hist < 0).any():
        raise HTTPException(status_code=422, detail="histogram entries must be non-negative")
    sums = hist.sum(axis=0)
    if not np.allclose(sums, 1.0, atol=1e-6):
        raise HTTPException(
            status_code=422, detail=f"histogram channels must each sum to 1, got {sums.tolist()}"
        )
    return hist


def create_app(
    checkpoint: str | Path | None = None,
    max_inflight: int = 4,
    queue_timeout_s: float = 30.0,
) -> FastAPI:
    ckpt_path = Path(checkpoint or os.environ.get(CHECKPOINT_ENV, ""))
    if not str(ckpt_path):
        raise ValueError(f"no checkpoint given and {CHECKPOINT_ENV} is unset")
    model, config, sidecar = load_model(ckpt_path)
    model_id = ckpt_path.stem
    gate = threading.Semaphore(max_inflight)

    app = FastAPI(title="wfrender", version=__version__)

    @app.middleware("http")
    async def payload_limit(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > MAX_PAYLOAD_BYTES:
            from fastapi.responses import JSONResponse

            return JSONResponse(status_code=413, content={"detail": "payload too large"})
        return await call_next(request)

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__, "model": model_id}

    @app.get("/v1/model-info")
    def model_info():
        return {
            "version": sidecar["version"],
            "checkpoint": model_id,
            "train_config": sidecar["train_config"],
            "model_config": sidecar["model_config"],
        }

    @app.post("/v1/render", response_model=RenderResponse)
    def render(req: RenderRequest):
        start = time.perf_counter()
        if req.checkpoint_id and req.checkpoint_id != model_id:
            raise HTTPException(
                status_code=409,
                detail=f"checkpoint {req.checkpoint_id!r} is not loaded (serving {model_id!r})",
            )
        import json as _json

        try:
            wf = parse_wireframe(_json.dumps(req.wireframe))
        except WireframeError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e

        hist = None
        if req.histogram is not None:
            hist = _validate_histogram(req.histogram)
        elif req.reference_image_b64 is not None:
            try:
                data = base64.b64decode(req.reference_image_b64)
            except Exception as e:
                raise HTTPException(status_code=422, detail="invalid base64 image") from e
            hist = color_histogram(_decode_image_bytes(data))
        if config.guidance and hist is None:
            raise HTTPException(
                status_code=422,
                detail="this checkpoint requires color guidance (histogram or reference image)",
            )
        if not config.guidance and hist is not None:
            raise HTTPException(
                status_code=422, detail="this checkpoint does not accept color guidance"
            )

        if not gate.acquire(timeout=queue_timeout_s):
            raise HTTPException(status_code=503, detail="render queue is full")
        try:
            scene, rec = _run_model(wf, hist)
        finally:
            gate.release()
        return RenderResponse(
            scene=_png_b64(scene),
            reconstructed_wireframe=_png_b64(rec),
            latency_ms=(time.perf_counter() - start) * 1000.0,
            model_version=f"{model_id}@{sidecar['version']}",
        )

    def _run_model(wf, hist):
        size = config.input_size
        raster = rasterize(wf, size, config.line_width)
        x = torch.from_numpy(raster.transpose(2, 0, 1)[None].copy())
        h = None
        if hist is not None:
            h = torch.from_numpy(np.asarray(hist, dtype=np.float32)[None])
        with torch.no_grad():
            e = model.encode(x, h)
            rec = model.decode_wireframe(e)
            scene = model.decode_scene(e)
        return (
            scene[0].numpy().transpose(1, 2, 0),
            rec[0].numpy().transpose(1, 2, 0),
        )

    @app.post("/v1/histogram")
    async def histogram(image: UploadFile):
        data = await image.read()
        if len(data) > MAX_PAYLOAD_BYTES:
            raise HTTPException(status_code=413, detail="payload too large")
        img = _decode_image_bytes(data)
        hist = color_histogram(img)
        return {"histogram": hist.tolist()}

    return app


def serve(
    checkpoint: str | Path | None = None,
    host: str = "127.0.0.1",
    port: int = 8000,
    max_inflight: int = 4,
) -> None:
    import uvicorn

    app = create_app(checkpoint, max_inflight=max_inflight)
    uvicorn.run(app, host=host, port=port)
