"""HTTP facade: sessions over the recording-swap environment, live frames,
metrics, and demonstration capture.

Sessions are in-memory (cheap to recreate); recorded demonstrations are the
valuable artifact and are appended to a JSON-lines log on disk immediately.
Per-session operations are serialized by a lock, so concurrent clients see
a strict history order.
"""

from __future__ import annotations

import io
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from .core import AccumulatedFrame, BiasSettings, event_rate
from .env import BiasAction, MdpEnv
from .fileio import load_manifest
from .tuner.features import FeatureConfig, extract_features, normalize_frame


class CreateSessionRequest(BaseModel):
    scene_id: str
    start: dict[str, int] = {}
    seed: int = 0


class AdjustRequest(BaseModel):
    delta_off: int = 0
    delta_on: int = 0


class DemoRequest(BaseModel):
    action: Optional[list[int]] = None
    mark_optimal: bool = False
    annotator: str = "human"


@dataclass
class Session:
    id: str
    env: MdpEnv
    scene_id: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    history: list[dict] = field(default_factory=list)
    demo_count: int = 0
    last_frame: Optional[AccumulatedFrame] = None

    @property
    def biases(self) -> BiasSettings:
        return self.env.current


def frame_to_png(frame: AccumulatedFrame) -> bytes:
    """ON counts in the red channel, OFF counts in the blue channel, both
    normalized then scaled by 255 and rounded."""
    from PIL import Image

    norm = normalize_frame(frame)
    rgb = np.zeros((frame.height, frame.width, 3), dtype=np.uint8)
    rgb[:, :, 0] = np.round(norm[0] * 255).astype(np.uint8)
    rgb[:, :, 2] = np.round(norm[1] * 255).astype(np.uint8)
    img = Image.fromarray(rgb, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def create_app(manifest_dir: str | Path, demo_log: str | Path | None = None) -> FastAPI:
    """Serve every corpus found under ``manifest_dir``.

    Each immediate subdirectory (or the directory itself) holding a
    manifest.json becomes a selectable scene.
    """
    manifest_dir = Path(manifest_dir)
    corpora: dict[str, tuple] = {}
    candidates = [manifest_dir] + sorted(p for p in manifest_dir.iterdir() if p.is_dir())
    for p in candidates:
        mpath = p / "manifest.json"
        if mpath.exists():
            manifest = load_manifest(mpath)
            corpora[manifest.scene_id] = (manifest, p)
    if not corpora:
        raise FileNotFoundError(f"no manifest.json found under {manifest_dir}")

    demo_log = Path(demo_log) if demo_log else manifest_dir / "demos.jsonl"
    demo_lock = threading.Lock()
    sessions: dict[str, Session] = {}
    feature_cfg = FeatureConfig()

    app = FastAPI(title="biasbench service")

    def get_session(session_id: str) -> Session:
        s = sessions.get(session_id)
        if s is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return s

    def observation_payload(s: Session) -> dict:
        frame = s.last_frame
        rec = s.env.recording()
        entry = s.env.manifest.entry_for(s.env.current)
        return {
            "session_id": s.id,
            "biases": s.biases.as_dict(),
            "frame_url": f"/api/sessions/{s.id}/frame.png",
            "event_rate": event_rate(rec),
            "window_us": s.env.window_us,
            "window_events": frame.total if frame else 0,
            "cached_metrics": entry.metrics or {},
            "demo_count": s.demo_count,
        }

    @app.get("/api/scenes")
    def scenes() -> dict:
        out = {}
        for scene_id, (manifest, _) in corpora.items():
            out[scene_id] = {"grid": manifest.grid, "entries": len(manifest.entries)}
        return out

    @app.post("/api/sessions")
    def create_session(req: CreateSessionRequest) -> dict:
        if req.scene_id not in corpora:
            raise HTTPException(status_code=404, detail=f"unknown scene {req.scene_id!r}")
        manifest, root = corpora[req.scene_id]
        start = BiasSettings(
            diff_on=req.start.get("diff_on", 0),
            diff_off=req.start.get("diff_off", 0),
            fo=req.start.get("fo", 0),
            hpf=req.start.get("hpf", 0),
            refr=req.start.get("refr", 0),
        )
        env = MdpEnv(manifest, root, seed=req.seed)
        session = Session(id=uuid.uuid4().hex[:12], env=env, scene_id=req.scene_id)
        session.last_frame = env.reset(start)
        session.history.append(
            {"biases": session.biases.as_dict(), "action": [0, 0, 0, 0, 0], "t": time.time()}
        )
        sessions[session.id] = session
        return observation_payload(session)

    @app.post("/api/sessions/{session_id}/adjust")
    def adjust(session_id: str, req: AdjustRequest) -> dict:
        s = get_session(session_id)
        with s.lock:
            action = BiasAction(d_off=req.delta_off, d_on=req.delta_on)
            frame, biases = s.env.step(action)
            s.last_frame = frame
            s.history.append(
                {"biases": biases.as_dict(), "action": list(action.as_tuple()), "t": time.time()}
            )
            return observation_payload(s)

    @app.get("/api/sessions/{session_id}/frame.png")
    def frame_png(session_id: str) -> Response:
        s = get_session(session_id)
        with s.lock:
            if s.last_frame is None:
                s.last_frame = s.env.observe()
            return Response(content=frame_to_png(s.last_frame), media_type="image/png")

    @app.get("/api/sessions/{session_id}/metrics")
    def session_metrics(session_id: str) -> dict:
        s = get_session(session_id)
        with s.lock:
            rec = s.env.recording()
            entry = s.env.manifest.entry_for(s.env.current)
            return {
                "biases": s.biases.as_dict(),
                "event_rate": event_rate(rec),
                "cached_metrics": entry.metrics or {},
                "history_length": len(s.history),
            }

    @app.post("/api/sessions/{session_id}/demos")
    def record_demo(session_id: str, req: DemoRequest) -> dict:
        s = get_session(session_id)
        with s.lock:
            if req.mark_optimal:
                action = BiasAction(0, 0)
            elif req.action is not None:
                try:
                    action = BiasAction.from_tuple(req.action)
                except ValueError as exc:
                    raise HTTPException(status_code=422, detail=str(exc))
            else:
                raise HTTPException(status_code=422, detail="need action or mark_optimal")
            if s.last_frame is None:
                s.last_frame = s.env.observe()
            features = extract_features(s.last_frame, feature_cfg)
            record = {
                "features": [float(v) for v in features.values],
                "action": list(action.as_tuple()),
                "biases": s.biases.as_dict(),
                "scene_id": s.scene_id,
                "annotator": req.annotator,
            }
            with demo_lock:
                with open(demo_log, "a") as fh:
                    fh.write(json.dumps(record) + "\n")
            s.demo_count += 1
            return {"demo_count": s.demo_count}

    @app.get("/api/demos/export", response_class=PlainTextResponse)
    def export_demos() -> str:
        with demo_lock:
            if not demo_log.exists():
                return ""
            return demo_log.read_text()

    return app


def serve(manifest_dir: str | Path, port: int = 8080, host: str = "127.0.0.1", demo_log=None) -> None:
    import uvicorn

    app = create_app(manifest_dir, demo_log=demo_log)
    uvicorn.run(app, host=host, port=port, log_level="warning")
