"""HTTP service for interactive multiscale feature editing.

A session uploads a mesh and runs a decomposition once; recombinations
then reuse the prefactorized reconstruction system, which is what makes
slider-driven exploration responsive. Mesh responses use a compact binary
buffer (see ``encode_mesh_payload``) instead of OBJ text.

Configuration (environment):

* ``SDMESH_SESSION_CAP`` — max resident sessions, LRU-evicted (default 16)
* ``SDMESH_MAX_UPLOAD_BYTES`` — upload size limit (default 50 MB)
* ``SDMESH_SESSION_DIR`` — optional directory for decomposition persistence
* ``SDMESH_PORT`` — port for ``python -m sdmesh.service`` (default 8000)
"""

import io as std_io
import json
import os
import struct
import threading
import uuid
from collections import OrderedDict
from dataclasses import replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .io import load_mesh, save_mesh
from .mesh import average_centroid_spacing, compute_face_geometry
from .multiscale import (
    RegionMask,
    combine,
    decompose,
    load_decomposition,
    save_decomposition,
)
from .paramselect import nu_range, region_stats
from .solver import FilterParams
from .vertex_update import normal_consistency_report

__all__ = ["create_app", "app", "encode_mesh_payload", "decode_mesh_payload"]


def encode_mesh_payload(mesh, deviations=None):
    """Serialize a mesh as a little-endian binary triangle buffer.

    Layout: ``uint32 n_vertices``, ``uint32 n_faces``, then vertex
    positions as ``n_vertices * 3`` float32, then face indices as
    ``n_faces * 3`` uint32. When ``deviations`` is given, one float32 per
    face is appended after the indices.
    """
    head = struct.pack("<II", mesh.n_vertices, mesh.n_faces)
    body = [
        head,
        mesh.vertices.astype("<f4").tobytes(),
        mesh.faces.astype("<u4").tobytes(),
    ]
    if deviations is not None:
        body.append(np.asarray(deviations).astype("<f4").tobytes())
    return b"".join(body)


def decode_mesh_payload(data):
    """Inverse of :func:`encode_mesh_payload`.

    Returns ``(positions, indices, deviations-or-None)``.
    """
    n_v, n_f = struct.unpack_from("<II", data, 0)
    offset = 8
    positions = np.frombuffer(data, dtype="<f4", count=n_v * 3, offset=offset)
    offset += n_v * 12
    indices = np.frombuffer(data, dtype="<u4", count=n_f * 3, offset=offset)
    offset += n_f * 12
    deviations = None
    if offset < len(data):
        deviations = np.frombuffer(data, dtype="<f4", count=n_f, offset=offset)
    return positions.reshape(-1, 3), indices.reshape(-1, 3), deviations


class CombineRequest(BaseModel):
    alpha: list[float]
    region: list[int] | None = None
    nu: float | None = None
    mu: float | None = None


class NuRangeRequest(BaseModel):
    region_a: list[int]
    region_b: list[int]


class Session:
    def __init__(self, mesh, schedule, decomp):
        self.mesh = mesh
        self.schedule = schedule
        self.decomp = decomp
        self.refiltered = {}
        self.lock = threading.Lock()


def _parse_schedule(raw, lc):
    entries = json.loads(raw) if raw else []
    schedule = []
    for entry in entries:
        eta = entry["eta"]
        if isinstance(eta, str):
            text = eta.strip().lower()
            eta = float(text[:-2]) * lc if text.endswith("lc") else float(text)
        schedule.append(
            FilterParams(
                lam=entry["lambda"],
                eta=eta,
                mu=entry["mu"],
                nu=entry["nu"],
                max_iters=entry.get("max_iters", 100),
                eps=entry.get("eps", 0.2),
                unit_constrained=True,
            )
        )
    return schedule


def create_app():
    app = FastAPI(title="sdmesh", version="0.1.0")
    cap = int(os.environ.get("SDMESH_SESSION_CAP", "16"))
    max_upload = int(os.environ.get("SDMESH_MAX_UPLOAD_BYTES", str(50 << 20)))
    persist_dir = os.environ.get("SDMESH_SESSION_DIR")
    sessions = OrderedDict()
    registry_lock = threading.Lock()

    def remember(session_id, session):
        with registry_lock:
            sessions[session_id] = session
            sessions.move_to_end(session_id)
            while len(sessions) > cap:
                sessions.popitem(last=False)

    def lookup(session_id):
        with registry_lock:
            session = sessions.get(session_id)
            if session is not None:
                sessions.move_to_end(session_id)
                return session
        if persist_dir:
            path = Path(persist_dir) / session_id
            if (path / "manifest.json").exists():
                decomp = load_decomposition(path)
                session = Session(decomp.original, decomp.schedule, decomp)
                remember(session_id, session)
                return session
        return None

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request, schedule: str | None = Query(None)):
        body = await request.body()
        if len(body) > max_upload:
            return JSONResponse({"detail": "upload too large"}, status_code=413)
        try:
            text = body.decode("utf-8")
            with _temporary_obj(text) as path:
                mesh = load_mesh(path)
            if mesh.n_faces == 0:
                raise ValueError("mesh has no faces")
            geom = compute_face_geometry(mesh, on_degenerate="skip")
            lc = average_centroid_spacing(mesh, geom)
            parsed = _parse_schedule(schedule, lc)
        except (ValueError, KeyError, json.JSONDecodeError) as err:
            return JSONResponse({"detail": str(err)}, status_code=400)
        decomp = decompose(mesh, parsed)
        decomp.system()  # prefactorize before the session becomes visible
        session_id = uuid.uuid4().hex
        session = Session(mesh, parsed, decomp)
        remember(session_id, session)
        if persist_dir:
            save_decomposition(decomp, Path(persist_dir) / session_id)
        return {"id": session_id, "levels": decomp.levels}

    @app.post("/sessions/{session_id}/combine")
    def combine_session(
        session_id: str, body: CombineRequest, deviations: int = Query(0)
    ):
        session = lookup(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        decomp = session.decomp
        if len(body.alpha) != decomp.levels:
            return JSONResponse(
                {"detail": f"alpha must have {decomp.levels} entries"},
                status_code=422,
            )
        with session.lock:
            if body.nu is not None or body.mu is not None:
                decomp = _refiltered(session, body.nu, body.mu)
            mask = None
            if body.region is not None:
                mask = RegionMask.from_faces(decomp.base, body.region)
            mesh = combine(decomp, body.alpha, mask=mask)
            targets = decomp.targets(body.alpha, mask=mask)[1]
            norms = np.linalg.norm(targets, axis=1)
            norms[norms == 0] = 1.0
            angles, flips = normal_consistency_report(mesh, targets / norms[:, None])
        payload = encode_mesh_payload(
            mesh, deviations=angles if deviations else None
        )
        headers = {
            "X-Consistency-Summary": json.dumps(
                {
                    "mean_deg": float(angles.mean()) if len(angles) else 0.0,
                    "max_deg": float(angles.max()) if len(angles) else 0.0,
                    "flipped": flips,
                }
            )
        }
        return Response(
            content=payload, media_type="application/octet-stream", headers=headers
        )

    def _refiltered(session, nu, mu):
        key = (nu, mu)
        if key not in session.refiltered:
            schedule = [
                replace(
                    p,
                    nu=nu if nu is not None else p.nu,
                    mu=mu if mu is not None else p.mu,
                )
                for p in session.schedule
            ]
            session.refiltered[key] = decompose(session.mesh, schedule)
        return session.refiltered[key]

    @app.post("/sessions/{session_id}/nu-range")
    def nu_range_session(session_id: str, body: NuRangeRequest):
        session = lookup(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        geom = compute_face_geometry(session.mesh, on_degenerate="skip")
        try:
            stats_a = region_stats(geom, geom.normals, body.region_a)
            stats_b = region_stats(geom, geom.normals, body.region_b)
        except ValueError as err:
            return JSONResponse({"detail": str(err)}, status_code=422)
        selection = nu_range(stats_a, stats_b)
        return {
            "nu_min": selection.nu_min,
            "nu_max": selection.nu_max,
            "rejected": selection.rejected,
            "nu": selection.nu,
            "mu": selection.mu,
            "message": (
                "select another pair of regions" if selection.rejected else None
            ),
        }

    @app.get("/sessions/{session_id}/levels")
    def levels(session_id: str):
        session = lookup(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        decomp = session.decomp
        out = []
        for k in range(decomp.levels):
            v_mag = np.linalg.norm(decomp.vertex_deltas[k], axis=1)
            n_mag = np.linalg.norm(decomp.normal_deltas[k], axis=1)
            params = decomp.schedule[k] if k < len(decomp.schedule) else None
            out.append(
                {
                    "level": k + 1,
                    "params": None
                    if params is None
                    else {
                        "lambda": params.lam,
                        "eta": params.eta,
                        "mu": params.mu,
                        "nu": params.nu,
                    },
                    "vertex_delta_histogram": _histogram(v_mag),
                    "normal_delta_histogram": _histogram(n_mag),
                }
            )
        return {"levels": decomp.levels, "entries": out}

    return app


def _histogram(magnitudes, bins=16):
    top = float(magnitudes.max()) if len(magnitudes) and magnitudes.max() > 0 else 1.0
    counts, edges = np.histogram(magnitudes, bins=bins, range=(0.0, top))
    return {"counts": counts.tolist(), "edges": edges.tolist()}


class _temporary_obj:
    """Context manager writing OBJ text to a temp file for the parser."""

    def __init__(self, text):
        self.text = text

    def __enter__(self):
        import tempfile

        fd, self.path = tempfile.mkstemp(suffix=".obj")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self.text)
        return self.path

    def __exit__(self, *exc):
        os.unlink(self.path)
        return False


app = create_app()


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=int(os.environ.get("SDMESH_PORT", "8000")))
