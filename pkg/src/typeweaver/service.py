"""HTTP session service for interactive review: one element at a time, the
user accepts or overrides each predicted type, and every decision conditions
all later predictions. Sessions persist as append-only decision logs."""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from pydantic import BaseModel

from .assignment import TypeAssignment
from .config import Config
from .decoder import DecisionError, DecoderConfig, InteractiveDecoder
from .graph import build_usage_graph
from .predictor import make_backend
from .project import load_project
from .pytypes import TypeParseError, parse_type


@dataclass
class ServiceConfig:
    project_path: str
    backend: str = "heuristic"
    state_dir: str | None = None
    config: Config = field(default_factory=Config)
    cors_origins: list[str] = field(default_factory=lambda: ["*"])


class Session:
    def __init__(self, sid: str, decoder: InteractiveDecoder, log_path: Path | None):
        self.sid = sid
        self.decoder = decoder
        self.log_path = log_path

    def append_log(self, record: dict) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")


class DecisionBody(BaseModel):
    element_id: str
    decisions: dict[str, dict]


class CreateBody(BaseModel):
    project: str | None = None
    backend: str | None = None


def _stable_json(data: dict) -> Response:
    return Response(
        content=json.dumps(data, indent=2, sort_keys=True) + "\n",
        media_type="application/json",
    )


def create_app(service_config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="typeweaver review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=service_config.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, Session] = {}
    projects: dict[str, tuple] = {}

    state_dir = Path(service_config.state_dir) if service_config.state_dir else None
    if state_dir:
        state_dir.mkdir(parents=True, exist_ok=True)

    def build_decoder(project_path: str, backend_spec: str) -> InteractiveDecoder:
        if project_path not in projects:
            project = load_project(project_path)
            projects[project_path] = (project, build_usage_graph(project))
        project, graph = projects[project_path]
        cfg = service_config.config
        backend = make_backend(
            backend_spec, timeout=cfg.http_timeout, retries=cfg.http_retries
        )
        return InteractiveDecoder(
            project,
            graph,
            backend,
            DecoderConfig(budgets=cfg.budgets, marker_base=cfg.marker_base),
        )

    def resume_session(sid: str) -> Session | None:
        if state_dir is None:
            return None
        log_path = state_dir / f"{sid}.jsonl"
        if not log_path.exists():
            return None
        lines = [
            json.loads(line)
            for line in log_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not lines or lines[0].get("kind") != "header":
            return None
        header = lines[0]
        decoder = build_decoder(header["project"], header["backend"])
        replayed: list[dict] = []
        for rec in lines[1:]:
            if rec.get("kind") == "undo":
                if replayed:
                    replayed.pop()
                continue
            replayed.append(rec)
        for rec in replayed:
            decisions = {
                int(k): (v["action"], v.get("type")) for k, v in rec["decisions"].items()
            }
            decoder.replay(rec["element_id"], {int(k): v for k, v in rec["predicted"].items()}, decisions)
        session = Session(sid, decoder, log_path)
        sessions[sid] = session
        return session

    def get_session(sid: str) -> Session:
        session = sessions.get(sid) or resume_session(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def current_view(session: Session) -> dict:
        decoder = session.decoder
        if decoder.done:
            return {
                "done": True,
                "element_id": None,
                "index": decoder.cursor,
                "element_count": decoder.element_count,
            }
        pending = decoder.current()
        element = decoder.project.element(pending.element)
        mi = pending.model_input
        return {
            "done": False,
            "element_id": str(pending.element),
            "index": pending.index,
            "element_count": decoder.element_count,
            "segments": {
                "preamble": mi.preamble if mi else "",
                "usees": mi.usee_context if mi else "",
                "main_code": mi.main_code if mi else "",
                "users": mi.user_context if mi else "",
            },
            "slots": [
                {
                    "index": s.index,
                    "role": s.role,
                    "name": s.name,
                    "predicted": (
                        pending.predictions[s.index].render()
                        if s.index in pending.predictions
                        else None
                    ),
                }
                for s in element.slots
            ],
        }

    @app.post("/sessions")
    def create_session(body: CreateBody):
        project_path = body.project or service_config.project_path
        backend_spec = body.backend or service_config.backend
        decoder = build_decoder(project_path, backend_spec)
        sid = uuid.uuid4().hex[:12]
        log_path = state_dir / f"{sid}.jsonl" if state_dir else None
        session = Session(sid, decoder, log_path)
        session.append_log(
            {"kind": "header", "project": project_path, "backend": backend_spec}
        )
        sessions[sid] = session
        return {"session_id": sid, "element_count": decoder.element_count}

    @app.get("/sessions/{sid}/current")
    def get_current(sid: str):
        return current_view(get_session(sid))

    @app.post("/sessions/{sid}/decision")
    def post_decision(sid: str, body: DecisionBody):
        session = get_session(sid)
        decoder = session.decoder
        if decoder.done:
            raise HTTPException(status_code=409, detail="session is complete")
        pending = decoder.current()
        if body.element_id != str(pending.element):
            raise HTTPException(
                status_code=409,
                detail=f"decision targets {body.element_id}, pending is {pending.element}",
            )
        decisions: dict[int, tuple[str, str | None]] = {}
        for key, value in body.decisions.items():
            action = value.get("action")
            if action == "override":
                text = value.get("type", "")
                try:
                    parse_type(text)
                except TypeParseError as e:
                    raise HTTPException(
                        status_code=422,
                        detail=f"slot {key}: unparseable type {text!r}: {e}",
                    ) from e
                decisions[int(key)] = ("override", text)
            elif action == "accept":
                decisions[int(key)] = ("accept", None)
            else:
                raise HTTPException(status_code=409, detail=f"unknown action {action!r}")
        predicted = {str(k): v.render() for k, v in pending.predictions.items()}
        try:
            decoder.decide(decisions)
        except DecisionError as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        session.append_log(
            {
                "kind": "decision",
                "element_id": body.element_id,
                "predicted": predicted,
                "decisions": {
                    str(k): {"action": a, "type": t} for k, (a, t) in decisions.items()
                },
            }
        )
        if decoder.done:
            return {"done": True, "next_element_id": None}
        return {"done": False, "next_element_id": str(decoder.schedule[decoder.cursor])}

    @app.get("/sessions/{sid}/assignment")
    def get_assignment(sid: str):
        session = get_session(sid)
        return _stable_json(session.decoder.assignment.to_json_dict())

    @app.post("/sessions/{sid}/undo")
    def post_undo(sid: str):
        session = get_session(sid)
        try:
            session.decoder.undo()
        except DecisionError as e:
            raise HTTPException(status_code=409, detail=str(e)) from e
        session.append_log({"kind": "undo"})
        return {
            "cursor": session.decoder.cursor,
            "element_id": str(session.decoder.schedule[session.decoder.cursor]),
        }

    return app
