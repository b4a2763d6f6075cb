"""HTTP authoring service over the corpus store.

JSON in and out, error payloads are ``{"code": <status>, "message": <text>}``.
Sessions are header-token scoped (``X-Session-Id``) and only hold the set of
candidate suggestions already shown; they expire after inactivity. Explain and
output-prediction responses are cached by content hash so repeated identical
requests hit the provider once.
"""

from __future__ import annotations

import hashlib
import threading
import time

from fastapi import FastAPI, Header, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import PipelineConfig
from .errors import (
    ConflictError,
    MalformedResponseError,
    NotFoundError,
    PreconditionError,
    TransportError,
)
from .gateway import Gateway
from .models import CodeSpan, Plan
from .store import Store


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class SessionMap:
    """Suggestion cursors per session token, expiring after inactivity."""

    def __init__(self, ttl: float = 3600.0):
        self.ttl = ttl
        self._lock = threading.Lock()
        self._sessions: dict[str, dict] = {}

    def shown(self, token: str) -> set[int]:
        now = time.monotonic()
        with self._lock:
            for key in [k for k, v in self._sessions.items() if now - v["touched"] > self.ttl]:
                del self._sessions[key]
            entry = self._sessions.setdefault(token, {"shown": set(), "touched": now})
            entry["touched"] = now
            return entry["shown"]

    def mark(self, token: str, candidate_id: int):
        with self._lock:
            entry = self._sessions.setdefault(
                token, {"shown": set(), "touched": time.monotonic()}
            )
            entry["shown"].add(candidate_id)
            entry["touched"] = time.monotonic()


# -- request bodies

class PlanCreate(BaseModel, extra="forbid"):
    domain_id: int
    mode: str
    source_ref: int | None = None
    selection: dict | None = None


class PlanPatch(BaseModel, extra="forbid"):
    version: int
    name: str | None = None
    goal: str | None = None
    solution: str | None = None
    canvas_x: float | None = None
    canvas_y: float | None = None


class SpanCreate(BaseModel, extra="forbid"):
    start: int
    end: int
    note: str | None = None


class GroupCreate(BaseModel, extra="forbid"):
    domain_id: int
    name: str
    plan_ids: list[int]
    move: bool = False


class GroupPatch(BaseModel, extra="forbid"):
    name: str | None = None
    plan_ids: list[int] | None = None
    move: bool = False


class ExplainBody(BaseModel, extra="forbid"):
    code: str
    start: int
    end: int


class PredictBody(BaseModel, extra="forbid"):
    code: str


def plan_json(plan: Plan) -> dict:
    return {
        "id": plan.id,
        "domain_id": plan.domain_id,
        "name": plan.name,
        "goal": plan.goal,
        "solution": plan.solution,
        "changeable_areas": [
            {"start": s.start, "end": s.end, "note": s.note} for s in plan.changeable_areas
        ],
        "provenance": plan.provenance,
        "source_id": plan.source_id,
        "candidate_id": plan.candidate_id,
        "canvas_x": plan.canvas_x,
        "canvas_y": plan.canvas_y,
        "group_id": plan.group_id,
        "version": plan.version,
    }


def create_app(store: Store, gateway: Gateway | None = None,
               config: PipelineConfig | None = None) -> FastAPI:
    config = config or PipelineConfig()
    app = FastAPI(title="planforge", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[config.cors_origin] if config.cors_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions = SessionMap(ttl=float(config.session_ttl))
    llm_cache: dict[str, str] = {}
    cache_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.status, "message": exc.message})

    @app.exception_handler(NotFoundError)
    async def handle_not_found(request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"code": 404, "message": str(exc)})

    @app.exception_handler(PreconditionError)
    async def handle_precondition(request: Request, exc: PreconditionError):
        return JSONResponse(status_code=422, content={"code": 422, "message": str(exc)})

    @app.exception_handler(ConflictError)
    async def handle_conflict(request: Request, exc: ConflictError):
        return JSONResponse(status_code=409, content={"code": 409, "message": str(exc)})

    @app.exception_handler(TransportError)
    async def handle_transport(request: Request, exc: TransportError):
        return JSONResponse(status_code=502, content={"code": 502, "message": str(exc)})

    @app.exception_handler(MalformedResponseError)
    async def handle_malformed(request: Request, exc: MalformedResponseError):
        return JSONResponse(status_code=502, content={"code": 502, "message": str(exc)})

    # ------------------------------------------------------------------
    # Browsing

    @app.get("/domains")
    def list_domains():
        return [
            {"id": d.id, "name": d.name, "library_name": d.library_name, "language": d.language}
            for d in store.list_domains()
        ]

    @app.get("/domains/{domain_id}/use-cases")
    def list_use_cases(domain_id: int, q: str | None = Query(default=None)):
        program_by_use_case = {
            p.use_case_id: p.id
            for p in store.list_programs(domain_id)
            if p.use_case_id is not None
        }
        if q is not None and q.strip():
            hits = store.search(domain_id, q, "use_cases")
            cases = [store.get_use_case(h.entity_id) for h in hits]
        else:
            cases = store.list_use_cases(domain_id)
        return [
            {
                "id": c.id,
                "ordinal": c.ordinal,
                "description": c.description,
                "program_id": program_by_use_case.get(c.id),
            }
            for c in cases
        ]

    @app.get("/domains/{domain_id}/programs")
    def list_programs(domain_id: int, q: str | None = Query(default=None)):
        if q is not None and q.strip():
            hits = store.search(domain_id, q, "programs")
            programs = [store.get_program(h.entity_id) for h in hits]
        else:
            programs = store.list_programs(domain_id)
        return [
            {
                "id": p.id,
                "use_case_id": p.use_case_id,
                "annotated_source": p.annotated_source or p.raw_source,
                "syntactically_valid": p.syntactically_valid,
                "origin": p.origin,
            }
            for p in programs
        ]

    @app.get("/domains/{domain_id}/plans")
    def list_plans(domain_id: int):
        return [plan_json(p) for p in store.list_plans(domain_id)]

    @app.get("/domains/{domain_id}/groups")
    def list_groups(domain_id: int):
        return [
            {"id": g.id, "name": g.name, "plan_ids": g.plan_ids}
            for g in store.list_groups(domain_id)
        ]

    @app.get("/domains/{domain_id}/candidates/next")
    def next_candidate(domain_id: int,
                       x_session_id: str = Header(default="anonymous")):
        shown = sessions.shown(x_session_id)
        for candidate in store.list_candidates(domain_id):
            if candidate.id in shown:
                continue
            sessions.mark(x_session_id, candidate.id)
            rep = store.get_snippet(candidate.representative_ids[0])
            return {
                "id": candidate.id,
                "name": candidate.name,
                "pending_name": candidate.pending_name,
                "size": candidate.size,
                "representative": {
                    "snippet_id": rep.id,
                    "program_id": rep.program_id,
                    "goal": rep.goal,
                    "code": rep.code,
                    "spans": [
                        {"start": s.start, "end": s.end, "note": s.note}
                        for s in rep.changeable_spans
                    ],
                },
            }
        raise ApiError(410, "all candidates have been suggested in this session")

    # ------------------------------------------------------------------
    # Plans

    def _free_slot(domain_id: int) -> tuple[float, float]:
        n = len(store.list_plans(domain_id))
        return 40.0 + (n % 4) * 280.0, 40.0 + (n // 4) * 200.0

    @app.post("/plans", status_code=201)
    def create_plan(body: PlanCreate):
        if body.mode not in ("empty", "from_selection", "from_program", "from_candidate"):
            raise ApiError(422, f"unknown mode: {body.mode}")
        x, y = _free_slot(body.domain_id)
        plan = Plan(id=0, domain_id=body.domain_id, canvas_x=x, canvas_y=y)

        if body.mode == "empty":
            pass
        elif body.mode in ("from_selection", "from_program"):
            if body.source_ref is None:
                raise ApiError(404, "source_ref (program id) required")
            program = store.get_program(body.source_ref)
            text = program.annotated_source or program.raw_source
            text_bytes = text.encode("utf-8")
            if body.mode == "from_selection":
                sel = body.selection or {}
                start, end = sel.get("start"), sel.get("end")
                if (
                    not isinstance(start, int) or not isinstance(end, int)
                    or not (0 <= start < end <= len(text_bytes))
                ):
                    raise ApiError(422, f"invalid selection span for {len(text_bytes)}-byte program")
                plan.solution = text_bytes[start:end].decode("utf-8", errors="replace")
                plan.source_start, plan.source_end = start, end
            else:
                plan.solution = text
                plan.source_start, plan.source_end = 0, len(text_bytes)
            if program.use_case_id is not None:
                plan.name = store.get_use_case(program.use_case_id).description
            plan.provenance = body.mode
            plan.source_id = program.id
        else:  # from_candidate
            if body.source_ref is None:
                raise ApiError(404, "source_ref (candidate id) required")
            candidate = store.get_candidate(body.source_ref)
            rep = store.get_snippet(candidate.representative_ids[0])
            plan.name = candidate.name
            plan.goal = rep.goal
            plan.solution = rep.code
            plan.changeable_areas = list(rep.changeable_spans)
            plan.provenance = "from_candidate"
            plan.source_id = candidate.id
            plan.candidate_id = candidate.id
        return plan_json(store.create_plan(plan))

    @app.get("/plans/{plan_id}")
    def get_plan(plan_id: int):
        return plan_json(store.get_plan(plan_id))

    @app.patch("/plans/{plan_id}")
    def patch_plan(plan_id: int, body: PlanPatch):
        fields = {
            k: v
            for k, v in (
                ("name", body.name), ("goal", body.goal), ("solution", body.solution),
                ("canvas_x", body.canvas_x), ("canvas_y", body.canvas_y),
            )
            if v is not None
        }
        return plan_json(store.update_plan(plan_id, body.version, **fields))

    @app.post("/plans/{plan_id}/duplicate", status_code=201)
    def duplicate_plan(plan_id: int):
        return plan_json(store.duplicate_plan(plan_id))

    @app.delete("/plans/{plan_id}", status_code=204)
    def delete_plan(plan_id: int):
        store.delete_plan(plan_id)

    @app.post("/plans/{plan_id}/changeable-areas", status_code=201)
    def add_span(plan_id: int, body: SpanCreate):
        if body.start < 0 or body.end <= body.start:
            raise ApiError(422, f"invalid span [{body.start}, {body.end})")
        return plan_json(store.add_plan_span(plan_id, CodeSpan(body.start, body.end, body.note)))

    @app.delete("/plans/{plan_id}/changeable-areas/{index}")
    def delete_span(plan_id: int, index: int):
        return plan_json(store.delete_plan_span(plan_id, index))

    @app.get("/plans/{plan_id}/similar")
    def similar_values(plan_id: int, component: str = Query(...)):
        if component not in ("name", "goal", "solution"):
            raise ApiError(422, f"unknown component: {component}")
        plan = store.get_plan(plan_id)
        field = "code" if component == "solution" else "goal"

        if plan.candidate_id is not None:
            candidate = store.get_candidate(plan.candidate_id)
            values = []
            for sid in candidate.snippet_ids:  # stored centroid-nearest first
                value = getattr(store.get_snippet(sid), field)
                if value and value not in values:
                    values.append(value)
            return {"component": component, "values": values}

        text = getattr(plan, component)
        words = [w for w in text.lower().split() if w]
        if not words:
            return {"component": component, "values": []}
        scored = []
        for snippet in store.list_snippets(plan.domain_id):
            hay = getattr(snippet, field).lower()
            score = sum(hay.count(w) for w in words)
            if score:
                scored.append((-score, snippet.id, getattr(snippet, field)))
        scored.sort()
        return {"component": component, "values": [v for _, _, v in scored[:10]]}

    @app.get("/plans/{plan_id}/context")
    def plan_context(plan_id: int):
        plan = store.get_plan(plan_id)
        if plan.provenance in ("from_selection", "from_program"):
            program = store.get_program(plan.source_id)
            return {
                "program_id": program.id,
                "annotated_source": program.annotated_source or program.raw_source,
                "start": plan.source_start or 0,
                "end": plan.source_end or 0,
            }
        if plan.provenance == "from_candidate":
            candidate = store.get_candidate(plan.candidate_id or plan.source_id)
            rep = store.get_snippet(candidate.representative_ids[0])
            program = store.get_program(rep.program_id)
            return {
                "program_id": program.id,
                "annotated_source": program.annotated_source or program.raw_source,
                "start": rep.code_start,
                "end": rep.code_end,
            }
        raise ApiError(404, f"plan {plan_id} has no source context")

    # ------------------------------------------------------------------
    # Groups

    @app.post("/groups", status_code=201)
    def create_group(body: GroupCreate):
        group = store.create_group(body.domain_id, body.name, body.plan_ids, move=body.move)
        return {"id": group.id, "name": group.name, "plan_ids": group.plan_ids}

    @app.patch("/groups/{group_id}")
    def patch_group(group_id: int, body: GroupPatch):
        group = store.update_group(group_id, name=body.name, plan_ids=body.plan_ids,
                                   move=body.move)
        return {"id": group.id, "name": group.name, "plan_ids": group.plan_ids}

    # ------------------------------------------------------------------
    # LLM delegations

    def _cached(key: str, compute) -> str:
        with cache_lock:
            if key in llm_cache:
                return llm_cache[key]
        value = compute()
        with cache_lock:
            llm_cache[key] = value
        return value

    @app.post("/explain")
    def explain(body: ExplainBody):
        if gateway is None:
            raise ApiError(502, "no completion provider configured")
        key = hashlib.sha256(
            f"explain\x00{body.start}\x00{body.end}\x00{body.code}".encode("utf-8")
        ).hexdigest()
        text = _cached(key, lambda: gateway.explain_selection(body.code, body.start, body.end))
        return {"explanation": text}

    @app.post("/predict-output")
    def predict_output(body: PredictBody):
        if gateway is None:
            raise ApiError(502, "no completion provider configured")
        key = hashlib.sha256(f"predict\x00{body.code}".encode("utf-8")).hexdigest()
        text = _cached(key, lambda: gateway.predict_output(body.code))
        return {"output": text}

    return app
