"""HTTP/JSON service for progressive inference and rating capture.

The model checkpoint is loaded once and shared immutably across
requests; the rating log is an append-only JSONL file guarded by a
single writer lock, so it survives restarts and concurrent sessions.
Request bodies are parsed by hand: malformed bodies are 400, while
out-of-range scores are 422.
"""
from __future__ import annotations

import io
import json
import os
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import infer, stats
from .checkpoint import load_checkpoint
from .data import HU_OFFSET
from .perf import tune_malloc

DATA_DIR_ENV = "PROGCT_DATA_DIR"


def _bad(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


class SessionStore:
    """Uploaded images, denoise sequences, and the persistent rating log."""

    def __init__(self, data_dir):
        self.root = Path(data_dir)
        (self.root / "images").mkdir(parents=True, exist_ok=True)
        (self.root / "sequences").mkdir(parents=True, exist_ok=True)
        self.ratings_path = self.root / "ratings.jsonl"
        self._write_lock = threading.Lock()

    def save_image(self, hu: np.ndarray) -> str:
        image_id = uuid.uuid4().hex
        np.save(self.root / "images" / f"{image_id}.npy", hu.astype(np.float64))
        return image_id

    def load_image(self, image_id: str) -> np.ndarray | None:
        path = self.root / "images" / f"{image_id}.npy"
        return np.load(path) if path.exists() else None

    def save_sequence(self, seq: infer.DenoiseSequence) -> None:
        d = self.root / "sequences" / seq.sequence_id
        d.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(seq.images, start=1):
            np.save(d / f"depth_{i}.npy", img)
        meta = {"source_id": seq.source_id, "window": seq.window,
                "max_depth": seq.max_depth, "trained_depth": seq.trained_depth,
                "extrapolated_depths": seq.extrapolated_depths,
                "checkpoint_id": seq.checkpoint_id}
        (d / "meta.json").write_text(json.dumps(meta))

    def sequence_meta(self, sequence_id: str) -> dict | None:
        path = self.root / "sequences" / sequence_id / "meta.json"
        return json.loads(path.read_text()) if path.exists() else None

    def sequence_depth(self, sequence_id: str, depth: int) -> np.ndarray | None:
        path = self.root / "sequences" / sequence_id / f"depth_{depth}.npy"
        return np.load(path) if path.exists() else None

    def append_rating(self, record: dict) -> None:
        with self._write_lock:
            with open(self.ratings_path, "a") as f:
                f.write(json.dumps(record) + "\n")
                f.flush()
                os.fsync(f.fileno())

    def all_ratings(self) -> list[stats.RatingRecord]:
        if not self.ratings_path.exists():
            return []
        return stats.load_ratings_jsonl(self.ratings_path)


def create_app(checkpoint_path=None, data_dir=None, generator=None, trained_depth=None,
               depth_cap=infer.DEPTH_CAP) -> FastAPI:
    """Build the service. Either a checkpoint path or a generator store."""
    tune_malloc()
    if data_dir is None:
        data_dir = os.environ.get(DATA_DIR_ENV, "./progct-data")
    store = SessionStore(data_dir)
    ckpt_id = ""
    if generator is None:
        if checkpoint_path is None:
            raise ValueError("create_app needs checkpoint_path or generator")
        ckpt = load_checkpoint(checkpoint_path)
        generator = infer.load_generator(ckpt)
        trained_depth = ckpt.train_depth if trained_depth is None else trained_depth
        ckpt_id = Path(checkpoint_path).name
    trained_depth = trained_depth or 1

    app = FastAPI(title="progct", docs_url=None, redoc_url=None)

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/images")
    async def upload_image(request: Request):
        body = await request.body()
        try:
            from PIL import Image
            img = Image.open(io.BytesIO(body))
            if img.mode not in ("I;16", "I;16B", "I"):
                return _bad(400, f"expected 16-bit grayscale PNG, got mode {img.mode!r}")
            hu = np.asarray(img).astype(np.float64) - HU_OFFSET
        except Exception:
            return _bad(400, "body is not a decodable PNG image")
        return {"image_id": store.save_image(hu)}

    @app.post("/api/denoise")
    async def denoise(request: Request):
        try:
            payload = json.loads(await request.body())
        except json.JSONDecodeError:
            return _bad(400, "malformed JSON body")
        if not isinstance(payload, dict):
            return _bad(400, "body must be a JSON object")
        image_id = payload.get("image_id")
        max_depth = payload.get("max_depth")
        window = payload.get("window", "abdomen")
        if not isinstance(image_id, str) or not isinstance(max_depth, int) \
                or isinstance(max_depth, bool):
            return _bad(400, "required fields: image_id (string), max_depth (integer)")
        if window not in ("abdomen", "chest"):
            return _bad(400, f"unknown window {window!r}")
        hu = store.load_image(image_id)
        if hu is None:
            return _bad(404, f"unknown image id {image_id!r}")
        if max_depth < 1:
            return _bad(400, "max_depth must be >= 1")
        try:
            seq = infer.progressive_infer(generator, hu, max_depth, window,
                                          trained_depth=trained_depth,
                                          checkpoint_id=ckpt_id, source_id=image_id,
                                          cap=depth_cap)
        except infer.DepthCapError as e:
            return _bad(400, str(e))
        store.save_sequence(seq)
        return {
            "sequence_id": seq.sequence_id,
            "depths": [f"/api/images/{seq.sequence_id}?depth={d}"
                       for d in range(1, max_depth + 1)],
            "extrapolated_depths": seq.extrapolated_depths,
            "window": window,
        }

    @app.get("/api/images/{item_id}")
    def get_image(item_id: str, depth: int | None = None, window: str = "abdomen"):
        meta = store.sequence_meta(item_id)
        if meta is not None:
            if depth is None or depth == 0:
                src = store.load_image(meta["source_id"])
                if src is None:
                    return _bad(404, "source image missing")
                from .ctsim import hu_window
                png = infer.to_display_png_bytes(hu_window(src, meta["window"]))
            else:
                img = store.sequence_depth(item_id, depth)
                if img is None:
                    return _bad(404, f"sequence has no depth {depth}")
                png = infer.to_display_png_bytes(img)
            return Response(content=png, media_type="image/png")
        hu = store.load_image(item_id)
        if hu is None:
            return _bad(404, f"unknown id {item_id!r}")
        if window not in ("abdomen", "chest"):
            return _bad(400, f"unknown window {window!r}")
        from .ctsim import hu_window
        return Response(content=infer.to_display_png_bytes(hu_window(hu, window)),
                        media_type="image/png")

    @app.post("/api/ratings")
    async def post_rating(request: Request):
        try:
            payload = json.loads(await request.body())
        except json.JSONDecodeError:
            return _bad(400, "malformed JSON body")
        if not isinstance(payload, dict):
            return _bad(400, "body must be a JSON object")
        for key in ("case_id", "reader_id", "method"):
            if not isinstance(payload.get(key), str) or not payload[key]:
                return _bad(400, f"required string field missing: {key}")
        for key in ("noise", "fidelity"):
            v = payload.get(key)
            if not isinstance(v, int) or isinstance(v, bool):
                return _bad(400, f"required integer field missing: {key}")
            if not (1 <= v <= 4):
                return _bad(422, f"{key} score {v} outside the 4-point scale [1,4]")
        depth = payload.get("depth")
        if depth is not None and (not isinstance(depth, int) or isinstance(depth, bool)):
            return _bad(400, "depth must be an integer when present")
        record = {
            "case_id": payload["case_id"], "reader_id": payload["reader_id"],
            "method": payload["method"], "noise": payload["noise"],
            "fidelity": payload["fidelity"],
        }
        if depth is not None:
            record["depth"] = depth
        if "region" in payload:
            if not isinstance(payload["region"], str):
                return _bad(400, "region must be a string when present")
            record["region"] = payload["region"]
        if "comment" in payload and isinstance(payload["comment"], str):
            record["comment"] = payload["comment"]
        try:
            store.append_rating(record)
        except OSError as e:
            return _bad(507, f"rating log write failed: {e}")
        return {"accepted": True}

    @app.get("/api/stats")
    def get_stats(family_a: str = "DL", family_b: str = "IR"):
        return stats.build_report(store.all_ratings(), family_a=family_a, family_b=family_b)

    app.state.store = store
    app.state.generator = generator
    return app
