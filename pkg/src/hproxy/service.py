"""HTTP/JSON editing session server.

A session holds a mesh, its hierarchy, and a texture model in memory;
edits are applied through the edit engine, strictly serialized per session,
with a bounded undo stack. Nothing persists across restarts; the export
endpoints return artifacts byte-identical to the CLI writers.
"""

import os
import tempfile
import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from fastapi import FastAPI, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .edit import DragEdit, TransferEdit, apply_edit, format_edit, transfer_features
from .hierarchy import load_hierarchy
from .mesh import Mesh
from .meshio import load_mesh, obj_text
from .render import Camera, png_bytes, rasterize
from .texture import build_fusion_plan, decode_vertex_colors, load_model, save_model, validate_model

UNDO_DEPTH = 32
EDIT_QUEUE_LIMIT = 8


class CreateSession(BaseModel):
    mesh_path: str
    hierarchy_path: str
    model_path: str


class DragBody(BaseModel):
    type: str
    level: int
    point_index: int
    displacement: list[float]
    tau: float = 1.0
    scope: str = "subtree"
    constraint_strength: float = 10.0


class TransferBody(BaseModel):
    type: str
    level: int
    source_indices: list[int]
    target_indices: list[int]
    k_neighbors: int = 4


@dataclass
class _Snapshot:
    mesh: Mesh
    hierarchy: object
    model: object
    script: list


@dataclass
class _Session:
    mesh: Mesh
    hierarchy: object
    model: object
    plan: object
    script: list = field(default_factory=list)
    undo: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    meta: threading.Lock = field(default_factory=threading.Lock)
    waiting: int = 0

    def snapshot(self) -> _Snapshot:
        return _Snapshot(self.mesh.copy(), self.hierarchy.copy(), self.model.copy(), list(self.script))

    def colors(self) -> np.ndarray:
        # decoded against the fusion plan frozen at session creation; drags
        # mark the hierarchy dirty instead of silently changing fusions
        return decode_vertex_colors(self.model, self.hierarchy, self.plan)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def create_app(allow_origin: str = "*") -> FastAPI:
    app = FastAPI(title="hproxy editing service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[allow_origin] if allow_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, _Session] = {}

    def _get(session_id: str) -> Optional[_Session]:
        return sessions.get(session_id)

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        try:
            mesh = load_mesh(body.mesh_path)
            hierarchy = load_hierarchy(body.hierarchy_path)
            model = load_model(body.model_path)
        except (OSError, ValueError) as exc:
            return _error(400, f"failed to load artifacts: {exc}")
        if mesh.n_vertices != len(hierarchy.levels[0]):
            return _error(
                422,
                f"mesh has {mesh.n_vertices} vertices, hierarchy level 1 has {len(hierarchy.levels[0])}",
            )
        try:
            validate_model(model, hierarchy)
            plan = build_fusion_plan(hierarchy, model.config)
        except ValueError as exc:
            return _error(422, str(exc))
        session_id = uuid.uuid4().hex
        sessions[session_id] = _Session(mesh, hierarchy, model, plan)
        lo, hi = mesh.bounds()
        return {
            "session_id": session_id,
            "level_sizes": hierarchy.level_sizes(),
            "bounding_box": {"min": lo.tolist(), "max": hi.tolist()},
            "n_faces": mesh.n_faces,
        }

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str, level: int = Query(default=1)):
        s = _get(session_id)
        if s is None:
            return _error(404, "unknown session")
        if level < 1 or level > s.hierarchy.n_levels:
            return _error(400, f"level must lie in [1, {s.hierarchy.n_levels}]")
        lv = s.hierarchy.levels[level - 1]
        return {
            "level": level,
            "level_sizes": s.hierarchy.level_sizes(),
            "dirty": s.hierarchy.dirty,
            "vertices": s.mesh.vertices.tolist(),
            "faces": s.mesh.faces.tolist(),
            "colors": s.colors().tolist(),
            "proxies": {
                "positions": lv.positions.tolist(),
                "normals": lv.normals.tolist(),
                "parents": lv.parents.tolist(),
                "residuals": lv.residuals.tolist(),
            },
        }

    @app.post("/sessions/{session_id}/edits")
    def post_edit(session_id: str, body: Union[DragBody, TransferBody]):
        s = _get(session_id)
        if s is None:
            return _error(404, "unknown session")
        with s.meta:
            if s.waiting >= EDIT_QUEUE_LIMIT:
                return _error(409, "edit queue is full")
            s.waiting += 1
        try:
            with s.lock:
                return _apply_edit_locked(s, body)
        finally:
            with s.meta:
                s.waiting -= 1

    def _apply_edit_locked(s: _Session, body):
        snapshot = s.snapshot()
        if isinstance(body, DragBody) and body.type == "drag":
            edit = DragEdit(
                level=body.level,
                point_index=body.point_index,
                displacement=np.asarray(body.displacement, dtype=np.float64),
                tau=body.tau,
                scope=body.scope,
            )
            try:
                edit.validate(s.hierarchy)
            except ValueError as exc:
                return _error(422, str(exc))
            old = s.mesh.vertices
            mesh, hierarchy = apply_edit(s.mesh, s.hierarchy, edit, body.constraint_strength)
            changed = np.nonzero(np.any(mesh.vertices != old, axis=1))[0]
            s.mesh = mesh
            s.hierarchy = hierarchy
            s.script.append(format_edit(edit))
            s.undo.append(snapshot)
            del s.undo[:-UNDO_DEPTH]
            return {
                "type": "drag",
                "changed_indices": changed.tolist(),
                "new_positions": mesh.vertices[changed].tolist(),
                "changed_color_indices": [],
                "new_colors": [],
                "dirty": hierarchy.dirty,
                "script_line": s.script[-1],
            }
        if isinstance(body, TransferBody) and body.type == "transfer":
            edit = TransferEdit(
                level=body.level,
                source_indices=body.source_indices,
                target_indices=body.target_indices,
                k_neighbors=body.k_neighbors,
            )
            try:
                edit.validate(s.hierarchy)
                old_colors = s.colors()
                model = transfer_features(s.model, s.hierarchy, edit)
            except ValueError as exc:
                return _error(422, str(exc))
            s.model = model
            new_colors = s.colors()
            changed = np.nonzero(np.any(new_colors != old_colors, axis=1))[0]
            s.script.append(format_edit(edit))
            s.undo.append(snapshot)
            del s.undo[:-UNDO_DEPTH]
            return {
                "type": "transfer",
                "changed_indices": [],
                "new_positions": [],
                "changed_color_indices": changed.tolist(),
                "new_colors": new_colors[changed].tolist(),
                "dirty": s.hierarchy.dirty,
                "script_line": s.script[-1],
            }
        return _error(422, f"unknown edit type {getattr(body, 'type', None)!r}")

    @app.post("/sessions/{session_id}/undo")
    def post_undo(session_id: str):
        s = _get(session_id)
        if s is None:
            return _error(404, "unknown session")
        with s.lock:
            if not s.undo:
                return _error(409, "undo stack is empty")
            snap = s.undo.pop()
            s.mesh = snap.mesh
            s.hierarchy = snap.hierarchy
            s.model = snap.model
            s.script = snap.script
            return {
                "undo_depth": len(s.undo),
                "script_length": len(s.script),
                "dirty": s.hierarchy.dirty,
            }

    @app.get("/sessions/{session_id}/render")
    def get_render(
        session_id: str,
        px: float = 0.0,
        py: float = 0.0,
        pz: float = 2.5,
        lx: float = 0.0,
        ly: float = 0.0,
        lz: float = 0.0,
        ux: float = 0.0,
        uy: float = 1.0,
        uz: float = 0.0,
        fov: float = 40.0,
        width: int = 256,
        height: int = 256,
    ):
        s = _get(session_id)
        if s is None:
            return _error(404, "unknown session")
        try:
            camera = Camera(
                position=(px, py, pz),
                look_at=(lx, ly, lz),
                up=(ux, uy, uz),
                vertical_fov=fov,
                width=width,
                height=height,
            )
            image = rasterize(s.mesh, s.colors(), camera)
        except ValueError as exc:
            return _error(400, str(exc))
        return Response(content=png_bytes(image), media_type="image/png")

    @app.get("/sessions/{session_id}/export/mesh")
    def export_mesh(session_id: str):
        s = _get(session_id)
        if s is None:
            return _error(404, "unknown session")
        return Response(content=obj_text(s.mesh).encode("ascii"), media_type="model/obj")

    @app.get("/sessions/{session_id}/export/model")
    def export_model(session_id: str):
        s = _get(session_id)
        if s is None:
            return _error(404, "unknown session")
        fd, tmp = tempfile.mkstemp(suffix=".hpm")
        os.close(fd)
        try:
            save_model(s.model, tmp)
            with open(tmp, "rb") as fh:
                data = fh.read()
        finally:
            os.unlink(tmp)
        return Response(content=data, media_type="application/octet-stream")

    @app.get("/sessions/{session_id}/export/script")
    def export_script(session_id: str):
        s = _get(session_id)
        if s is None:
            return _error(404, "unknown session")
        text = "\n".join(s.script) + ("\n" if s.script else "")
        return Response(content=text.encode("ascii"), media_type="text/plain")

    return app
