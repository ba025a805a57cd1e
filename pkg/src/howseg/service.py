"""JSON-over-HTTP session service backing the interactive annotator UI.

Scenes are immutable once uploaded; sessions hold the only mutable state.
Requests within one session are serialized by a per-session lock while
distinct sessions proceed fully in parallel.
"""

from __future__ import annotations

import math
import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware

from . import metrics
from .model import ValidationError
from .sceneio import LoadedScene, SceneFormatError, read_scene
from .session import SessionConfig, SessionState, apply_clicks, open_session
from .simulate import STRATEGIES, StrategySpec, run_strategy

WIRE_POINT_LIMIT = 100_000

_CONFIG_KEYS = {
    "initial_prototypes": int,
    "sigma": float,
    "crf_lambda": float,
    "crf_delta": float,
    "mf_iterations": int,
    "seed": int,
    "max_disambiguation_rounds": int,
    "enable_disambiguation": bool,
}


@dataclass
class _SessionEntry:
    state: SessionState
    scene_id: str
    scene: LoadedScene
    lock: threading.Lock = field(default_factory=threading.Lock)


class ServiceHub:
    """In-memory scene and session registry."""

    def __init__(self):
        self.scenes: dict[str, LoadedScene] = {}
        self.sessions: dict[str, _SessionEntry] = {}
        self._lock = threading.Lock()

    def add_scene(self, scene: LoadedScene) -> str:
        scene_id = uuid.uuid4().hex[:12]
        with self._lock:
            self.scenes[scene_id] = scene
        return scene_id

    def add_session(self, entry: _SessionEntry) -> str:
        session_id = uuid.uuid4().hex[:12]
        with self._lock:
            self.sessions[session_id] = entry
        return session_id

    def scene(self, scene_id: str) -> LoadedScene:
        try:
            return self.scenes[scene_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown scene {scene_id}")

    def session(self, session_id: str) -> _SessionEntry:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")


def _config_from_payload(payload: Optional[dict]) -> SessionConfig:
    kwargs = {}
    for key, caster in _CONFIG_KEYS.items():
        if payload and key in payload:
            kwargs[key] = caster(payload[key])
    try:
        return SessionConfig(**kwargs)
    except ValidationError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


def _session_metrics(entry: _SessionEntry) -> Optional[dict]:
    frame = entry.scene.frame
    if frame.gt_labels is None:
        return None
    state = entry.state
    mapped = metrics.map_to_scene_labels(
        state.prediction.point_labels, state.label_space, entry.scene.novel_names
    )
    tally = metrics.tally_from_labels(mapped, frame.gt_labels, frame.base_count)
    out = {"miou_b": metrics.miou(tally, "base"), "miou_a": metrics.miou(tally, "all")}
    try:
        out["miou_n"] = metrics.miou(tally, "novel")
        out["hm"] = metrics.harmonic_mean(out["miou_b"], out["miou_n"])
    except ValueError:
        out["miou_n"] = None
        out["hm"] = None
    return out


def _summary(session_id: str, entry: _SessionEntry) -> dict:
    state = entry.state
    return {
        "session_id": session_id,
        "scene_id": entry.scene_id,
        "iteration": state.iteration,
        "n": state.frame.n,
        "num_prototypes": state.prototypes.count,
        "clicks_total": len(state.annotations),
        "label_space": state.label_space.to_dict(),
        "metrics": _session_metrics(entry),
    }


def create_app(hub: Optional[ServiceHub] = None) -> FastAPI:
    hub = hub or ServiceHub()
    app = FastAPI(title="howseg session service")
    app.state.hub = hub
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/scenes")
    async def upload_scene(request: Request):
        body = await request.body()
        try:
            scene = read_scene(body)
        except SceneFormatError as exc:
            raise HTTPException(status_code=400, detail=f"{exc.code}: {exc}")
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        scene_id = hub.add_scene(scene)
        return {
            "scene_id": scene_id,
            "n": scene.frame.n,
            "base_classes": list(scene.base_names),
            "has_gt": scene.frame.gt_labels is not None,
        }

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        scene_id = payload.get("scene_id")
        if not scene_id:
            raise HTTPException(status_code=400, detail="scene_id required")
        scene = hub.scene(str(scene_id))
        config = _config_from_payload(payload.get("config"))
        try:
            state = open_session(scene.frame, config, base_names=scene.base_names)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        entry = _SessionEntry(state=state, scene_id=str(scene_id), scene=scene)
        session_id = hub.add_session(entry)
        return _summary(session_id, entry)

    @app.get("/sessions/{session_id}/state")
    def session_state(
        session_id: str,
        chunk: int = Query(default=0, ge=0),
        full: int = Query(default=0),
    ):
        entry = hub.session(session_id)
        with entry.lock:
            state = entry.state
            n = state.frame.n
            prediction = state.prediction
            space = state.label_space
            names = list(space.all_names())
            point_labels = prediction.point_labels

            if full:
                num_chunks = max(1, math.ceil(n / WIRE_POINT_LIMIT))
                if chunk >= num_chunks:
                    raise HTTPException(status_code=400, detail="chunk out of range")
                sl = slice(chunk * WIRE_POINT_LIMIT, min(n, (chunk + 1) * WIRE_POINT_LIMIT))
                indices = np.arange(sl.start, sl.stop)
                stride = 1
            else:
                stride = max(1, math.ceil(n / WIRE_POINT_LIMIT))
                indices = np.arange(0, n, stride)
                num_chunks = max(1, math.ceil(n / WIRE_POINT_LIMIT))

            return {
                "session_id": session_id,
                "iteration": state.iteration,
                "n": n,
                "stride": stride,
                "chunk": chunk,
                "num_chunks": num_chunks,
                "indices": indices.tolist(),
                "positions": state.frame.positions[indices].astype(float).tolist(),
                "point_labels": point_labels[indices].astype(int).tolist(),
                "point_label_names": [names[l] for l in point_labels[indices]],
                "gt_labels": (
                    state.frame.gt_labels[indices].astype(int).tolist()
                    if state.frame.gt_labels is not None
                    else None
                ),
                "prototype_labels": prediction.prototype_labels.astype(int).tolist(),
                "prototype_probs": prediction.prototype_probs.tolist(),
                "correspondence": prediction.correspondence[indices].astype(int).tolist(),
                "label_space": space.to_dict(),
                "metrics": _session_metrics(entry),
            }

    @app.post("/sessions/{session_id}/annotations")
    def annotate(session_id: str, payload: dict = Body(...)):
        entry = hub.session(session_id)
        clicks_raw = payload.get("clicks")
        if not isinstance(clicks_raw, list):
            raise HTTPException(status_code=409, detail="clicks must be a list")
        clicks = []
        for item in clicks_raw:
            if not isinstance(item, dict) or "point" not in item or "label_name" not in item:
                raise HTTPException(status_code=409, detail="click needs point and label_name")
            label = item["label_name"]
            if not isinstance(label, str) or not label.strip():
                raise HTTPException(status_code=409, detail="label_name must be a non-empty string")
            clicks.append((int(item["point"]), label))
        with entry.lock:
            try:
                entry.state = apply_clicks(entry.state, clicks)
            except ValidationError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return _summary(session_id, entry)

    @app.post("/sessions/{session_id}/simulate")
    def simulate(session_id: str, payload: dict = Body(...)):
        entry = hub.session(session_id)
        kind = payload.get("strategy", "ioncoc")
        if kind == "iter":
            kind = "iterative"
        if kind not in STRATEGIES:
            raise HTTPException(status_code=400, detail=f"strategy must be one of {STRATEGIES}")
        try:
            spec = StrategySpec(kind=kind, budget=int(payload.get("budget", 20)))
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if entry.scene.frame.gt_labels is None:
            raise HTTPException(status_code=400, detail="scene has no ground truth")
        with entry.lock:
            entry.state, used = run_strategy(entry.state, spec, entry.scene.novel_names)
            summary = _summary(session_id, entry)
        summary["clicks_used"] = used
        summary["strategy"] = kind
        summary["budget"] = spec.budget
        return summary

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        hub.session(session_id)  # 404 when absent
        with hub._lock:
            hub.sessions.pop(session_id, None)
        return None

    return app
