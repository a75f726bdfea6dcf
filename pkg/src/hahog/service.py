"""HTTP service for the expert review loop.

Serves corpus frames with the current model's detections, accepts verdicts
(per-detection correct/false-positive judgments plus added missed positions),
and persists the mined windows into the dataset store.  Verdict submission is
idempotent on the verdict's content hash; re-submitting a different verdict
for the same frame is a conflict.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .depth import load_calibration, load_frame, to_height_field
from .detector import DetectorConfig, detect
from .errors import DataError
from .features import FeatureConfig
from .mlp import load_model
from .training import DatasetStore, ingest_hard_mined

log = logging.getLogger(__name__)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": code, "message": message}
    )


def _verdict_hash(verdict: dict) -> str:
    blob = json.dumps(verdict, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class ServiceState:
    corpus_dir: Path
    store: DatasetStore
    model_path: Path
    det_cfg: DetectorConfig
    seed: int = 0

    def __post_init__(self) -> None:
        self.model = load_model(self.model_path)
        if self.model.feature_config is None:
            raise DataError(f"{self.model_path}: model carries no feature config")
        self.fc: FeatureConfig = self.model.feature_config
        self.model_hash = hashlib.sha256(self.model_path.read_bytes()).hexdigest()[:16]
        frames = sorted((self.corpus_dir / "frames").glob("*.pgm"))
        if not frames:
            frames = sorted(self.corpus_dir.glob("*.pgm"))
        self.frame_paths = {p.stem: p for p in frames}
        order = sorted(self.frame_paths)
        rng = np.random.default_rng(self.seed)
        rng.shuffle(order)
        self.queue: list[str] = order
        self.reviewed: dict[str, tuple[str, dict]] = {}
        self.detections_cache: dict[tuple[str, str], object] = {}
        self.ingest_lock = threading.Lock()

    def frame_path(self, frame_id: str) -> Path | None:
        return self.frame_paths.get(frame_id)

    def detections_for(self, frame_id: str):
        key = (frame_id, self.model_hash)
        if key not in self.detections_cache:
            path = self.frame_paths[frame_id]
            frame = load_frame(path)
            calib = load_calibration(path)
            self.detections_cache[key] = detect(
                frame, calib, self.model, self.det_cfg
            )
        return self.detections_cache[key]


def create_app(
    corpus_dir: str | Path,
    model_path: str | Path,
    store_dir: str | Path,
    det_cfg: DetectorConfig | None = None,
    seed: int = 0,
) -> FastAPI:
    state = ServiceState(
        corpus_dir=Path(corpus_dir),
        store=DatasetStore(store_dir),
        model_path=Path(model_path),
        det_cfg=det_cfg or DetectorConfig(),
        seed=seed,
    )

    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        # sample writes are already atomic; log the final state for the record
        log.info("shutdown: store counts %s", state.store.counts())

    app = FastAPI(title="overhead-localizer review service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.svc = state

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model_hash": state.model_hash,
            "store": state.store.counts(),
            "frames": len(state.frame_paths),
            "reviewed": len(state.reviewed),
        }

    @app.get("/review/next")
    def review_next():
        for fid in state.queue:
            if fid not in state.reviewed:
                ds = state.detections_for(fid)
                return {
                    "frame_id": fid,
                    "status": "pending",
                    "detections": [
                        {"id": f"d{i}", "x": c.x, "y": c.y, "alpha": round(c.alpha, 6)}
                        for i, c in enumerate(ds.detections)
                    ],
                    "frame": f"/frames/{fid}.pgm",
                    "meta": f"/frames/{fid}/meta",
                    "reviewed": len(state.reviewed),
                    "total": len(state.frame_paths),
                }
        return {
            "empty": True,
            "reviewed": len(state.reviewed),
            "total": len(state.frame_paths),
        }

    @app.get("/frames/{frame_id}.pgm")
    def frame_raster(frame_id: str):
        path = state.frame_path(frame_id)
        if path is None:
            return _error(404, "unknown_frame", f"no frame {frame_id!r}")
        return Response(
            content=path.read_bytes(), media_type="application/octet-stream"
        )

    @app.get("/frames/{frame_id}/meta")
    def frame_meta(frame_id: str):
        path = state.frame_path(frame_id)
        if path is None:
            return _error(404, "unknown_frame", f"no frame {frame_id!r}")
        return json.loads(path.with_suffix(".json").read_text())

    @app.get("/frames/{frame_id}/detections")
    def frame_detections(frame_id: str):
        if state.frame_path(frame_id) is None:
            return _error(404, "unknown_frame", f"no frame {frame_id!r}")
        ds = state.detections_for(frame_id)
        return {
            "frame_id": frame_id,
            "method": ds.method,
            "model_hash": state.model_hash,
            "detections": [
                {"id": f"d{i}", "x": c.x, "y": c.y, "alpha": round(c.alpha, 6)}
                for i, c in enumerate(ds.detections)
            ],
        }

    @app.post("/frames/{frame_id}/verdict")
    async def submit_verdict(frame_id: str, request: Request):
        path = state.frame_path(frame_id)
        if path is None:
            return _error(404, "unknown_frame", f"no frame {frame_id!r}")
        try:
            verdict = await request.json()
        except json.JSONDecodeError:
            return _error(400, "bad_verdict", "body is not valid JSON")
        vhash = _verdict_hash(verdict)

        with state.ingest_lock:
            if frame_id in state.reviewed:
                prev_hash, prev_summary = state.reviewed[frame_id]
                if prev_hash == vhash:
                    return dict(prev_summary, replay=True)
                return _error(
                    409,
                    "verdict_conflict",
                    f"frame {frame_id!r} already reviewed with a different verdict",
                )
            ds = state.detections_for(frame_id)
            judgments: dict[int, str] = {}
            for det_id, judgment in (verdict.get("judgments") or {}).items():
                if not (det_id.startswith("d") and det_id[1:].isdigit()):
                    return _error(
                        400, "unknown_detection", f"bad detection id {det_id!r}"
                    )
                idx = int(det_id[1:])
                if idx >= len(ds.detections):
                    return _error(
                        404, "unknown_detection", f"no detection {det_id!r}"
                    )
                if judgment not in ("correct", "false-positive"):
                    return _error(
                        400, "bad_verdict", f"bad judgment {judgment!r}"
                    )
                judgments[idx] = judgment
            missed = [(int(x), int(y)) for x, y in (verdict.get("missed") or [])]

            frame = load_frame(path)
            calib = load_calibration(path)
            field_ = to_height_field(frame, calib)
            try:
                summary = ingest_hard_mined(
                    state.store, field_, ds, judgments, missed, state.fc
                )
            except DataError as exc:
                return _error(404, "unknown_detection", str(exc))
            summary = {
                "frame_id": frame_id,
                "positives": summary["positives"],
                "negatives": summary["negatives"],
                "skipped": summary["skipped"],
            }
            state.reviewed[frame_id] = (vhash, summary)
            return dict(summary, replay=False)

    @app.get("/store/stats")
    def store_stats():
        return {
            "counts": state.store.counts(),
            "by_provenance": state.store.counts_by_provenance(),
        }

    return app


def serve(
    corpus_dir: str | Path,
    model_path: str | Path,
    store_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8008,
    det_cfg: DetectorConfig | None = None,
    seed: int = 0,
) -> None:
    """Run the review service until interrupted."""
    import uvicorn

    app = create_app(corpus_dir, model_path, store_dir, det_cfg=det_cfg, seed=seed)
    uvicorn.run(app, host=host, port=port, log_level="info")
