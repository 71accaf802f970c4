"""Session service for interactive hierarchy editing.

Each session owns a data matrix and a cluster tree plus a revision counter
that increments on every mutation.  Mutating requests carry the revision
they were computed against; a mismatch returns 409 so concurrent editors
never clobber each other.  Within a session, mutations are serialized by a
lock; reads never change the revision.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from .endmembers import extract_pure_pixels
from .hierarchy import ClusterTree
from .io import DataMatrix, FormatError, encode_pgm, load_cube, load_matrix_csv
from .synth import SynthConfig, generate

PGM_MEDIA_TYPE = "image/x-portable-graymap"

SPLITTER_TOKENS = {
    "rank2nmf": "rank2nmf",
    "h2nmf": "rank2nmf",
    "kmeans": "kmeans",
    "hkm": "kmeans",
    "spherical_kmeans": "spherical_kmeans",
    "hspkm": "spherical_kmeans",
}


@dataclass
class Session:
    id: str
    data: DataMatrix
    tree: ClusterTree
    revision: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionBody(BaseModel):
    source: dict
    splitter: str = "rank2nmf"
    delta_hat: float = 0.05
    objective: str = "default"
    seed: int = 0


class SplitBody(BaseModel):
    node_id: int
    revision: int
    method: str | None = None


class FuseBody(BaseModel):
    leaf_a: int
    leaf_b: int
    revision: int


class AutoBody(BaseModel):
    r: int
    revision: int | None = None


def _load_source(source: dict) -> DataMatrix:
    kind = source.get("kind", "auto")
    if kind == "synthetic":
        inst = generate(
            SynthConfig(
                epsilon=float(source.get("epsilon", 0.0)),
                s=int(source.get("s", 0)),
                b=int(source.get("b", 0)),
                seed=int(source.get("seed", 0)),
                r=int(source.get("r", 6)),
                bands=int(source.get("bands", 188)),
            )
        )
        n = inst.M.shape[1]
        height = max(d for d in range(1, int(n**0.5) + 1) if n % d == 0)
        return DataMatrix(data=inst.M, geometry=(n // height, height))
    path = source.get("path")
    if not path:
        raise HTTPException(422, "source needs a path or kind=synthetic")
    try:
        if kind == "cube":
            return load_cube(path)
        if kind == "csv":
            return load_matrix_csv(path)
        try:
            return load_cube(path)
        except FormatError:
            return load_matrix_csv(path)
    except (FormatError, OSError) as exc:
        raise HTTPException(422, f"cannot load source: {exc}") from exc


def create_app(
    initial: DataMatrix | None = None,
    *,
    splitter: str = "rank2nmf",
    delta_hat: float = 0.05,
    objective: str = "default",
    seed: int = 0,
) -> FastAPI:
    """Build the service; ``initial`` preloads session "s1"."""
    app = FastAPI(title="h2nmf session service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    counter = {"next": 1}

    def _new_session(data: DataMatrix, **tree_kw) -> Session:
        tree = ClusterTree(data.data, **tree_kw)
        with registry_lock:
            sid = f"s{counter['next']}"
            counter["next"] += 1
            session = Session(id=sid, data=data, tree=tree)
            sessions[sid] = session
        return session

    def _get_session(session_id: str) -> Session:
        try:
            return sessions[session_id]
        except KeyError:
            raise HTTPException(404, f"unknown session {session_id}") from None

    def _tree_payload(session: Session) -> dict:
        return {"revision": session.revision, "tree": session.tree.to_document()}

    if initial is not None:
        _new_session(
            initial,
            splitter=splitter,
            delta_hat=delta_hat,
            objective=objective,
            seed=seed,
        )

    @app.post("/sessions")
    def create_session(body: SessionBody):
        token = SPLITTER_TOKENS.get(body.splitter)
        if token is None:
            raise HTTPException(422, f"unknown splitter {body.splitter!r}")
        data = _load_source(body.source)
        session = _new_session(
            data,
            splitter=token,
            delta_hat=body.delta_hat,
            objective=body.objective,
            seed=body.seed,
        )
        m, n = data.data.shape
        return {
            "session_id": session.id,
            "n": n,
            "m": m,
            "geometry": list(data.geometry) if data.geometry else None,
        }

    @app.get("/sessions/{session_id}/tree")
    def get_tree(session_id: str):
        return _tree_payload(_get_session(session_id))

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str):
        session = _get_session(session_id)
        return {"revision": session.revision, "log": session.tree.split_log}

    @app.post("/sessions/{session_id}/split")
    def split(session_id: str, body: SplitBody):
        session = _get_session(session_id)
        method = None
        if body.method is not None:
            method = SPLITTER_TOKENS.get(body.method)
            if method is None:
                raise HTTPException(422, f"unknown splitter {body.method!r}")
        with session.lock:
            if body.revision != session.revision:
                raise HTTPException(409, "stale revision")
            if body.node_id not in session.tree.nodes:
                raise HTTPException(404, f"unknown node {body.node_id}")
            try:
                session.tree.interactive_split(body.node_id, method)
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            session.revision += 1
            return _tree_payload(session)

    @app.post("/sessions/{session_id}/fuse")
    def fuse(session_id: str, body: FuseBody):
        session = _get_session(session_id)
        with session.lock:
            if body.revision != session.revision:
                raise HTTPException(409, "stale revision")
            for node_id in (body.leaf_a, body.leaf_b):
                if node_id not in session.tree.nodes:
                    raise HTTPException(404, f"unknown node {node_id}")
            try:
                session.tree.interactive_fuse(body.leaf_a, body.leaf_b)
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            session.revision += 1
            return _tree_payload(session)

    @app.post("/sessions/{session_id}/auto")
    def auto(session_id: str, body: AutoBody):
        session = _get_session(session_id)
        with session.lock:
            if body.revision is not None and body.revision != session.revision:
                raise HTTPException(409, "stale revision")
            before = len(session.tree.split_log)
            try:
                session.tree.auto_split_to(body.r)
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            session.revision += 1
            payload = _tree_payload(session)
            payload["applied"] = session.tree.split_log[before:]
            return payload

    @app.get("/sessions/{session_id}/clusters/{node_id}/map.pgm")
    def cluster_map(session_id: str, node_id: int):
        session = _get_session(session_id)
        if session.data.geometry is None:
            raise HTTPException(400, "no image geometry")
        if node_id not in session.tree.nodes:
            raise HTTPException(404, f"unknown node {node_id}")
        member = [0.0] * session.tree.n
        for idx in session.tree.nodes[node_id].index_set:
            member[int(idx)] = 1.0
        data, _ = encode_pgm(member, session.data.geometry)
        return Response(content=data, media_type=PGM_MEDIA_TYPE)

    @app.get("/sessions/{session_id}/endmembers")
    def endmembers(session_id: str):
        session = _get_session(session_id)
        ends = extract_pure_pixels(session.data.data, session.tree)
        return {
            "format": "h2nmf-endmembers/1",
            "leaf_ids": ends.leaf_ids,
            "pixel_indices": [int(i) for i in ends.pixel_indices],
            "signatures": [
                [float(v) for v in ends.signatures[:, k]]
                for k in range(ends.signatures.shape[1])
            ],
        }

    return app
