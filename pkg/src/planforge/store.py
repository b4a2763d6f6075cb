"""Single-file SQLite store for every domain entity.

One shared connection guarded by a re-entrant lock; every mutation runs
inside a transaction so a failed operation leaves the file untouched.
Embeddings are packed little-endian float32 blobs.
"""

from __future__ import annotations

import json
import sqlite3
import struct
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConflictError, NotFoundError, PreconditionError
from .models import (
    CodeSpan,
    Domain,
    ExampleProgram,
    Plan,
    PlanCandidate,
    PlanGroup,
    Snippet,
    UseCase,
)
from .segmenter import SegmentedProgram, validate_syntax

_SCHEMA = """
CREATE TABLE IF NOT EXISTS domains (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    library_name TEXT NOT NULL CHECK (length(library_name) > 0),
    language TEXT NOT NULL DEFAULT 'python',
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS use_cases (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id),
    description TEXT NOT NULL CHECK (length(description) > 0),
    ordinal INTEGER NOT NULL,
    UNIQUE (domain_id, ordinal)
);
CREATE TABLE IF NOT EXISTS programs (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id),
    use_case_id INTEGER REFERENCES use_cases(id),
    raw_source TEXT NOT NULL,
    annotated_source TEXT NOT NULL DEFAULT '',
    syntactically_valid INTEGER NOT NULL,
    origin TEXT NOT NULL CHECK (origin IN ('generated', 'ingested'))
);
CREATE TABLE IF NOT EXISTS snippets (
    id INTEGER PRIMARY KEY,
    program_id INTEGER NOT NULL REFERENCES programs(id),
    ordinal INTEGER NOT NULL,
    goal TEXT NOT NULL,
    code TEXT NOT NULL,
    comment_text TEXT NOT NULL DEFAULT '',
    code_start INTEGER NOT NULL DEFAULT 0,
    code_end INTEGER NOT NULL DEFAULT 0,
    embedding BLOB,
    UNIQUE (program_id, ordinal)
);
CREATE TABLE IF NOT EXISTS snippet_spans (
    id INTEGER PRIMARY KEY,
    snippet_id INTEGER NOT NULL REFERENCES snippets(id),
    position INTEGER NOT NULL,
    start INTEGER NOT NULL,
    end INTEGER NOT NULL,
    note TEXT
);
CREATE TABLE IF NOT EXISTS candidates (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id),
    name TEXT NOT NULL,
    pending_name INTEGER NOT NULL DEFAULT 0,
    centroid BLOB NOT NULL,
    size INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS candidate_members (
    candidate_id INTEGER NOT NULL REFERENCES candidates(id),
    snippet_id INTEGER NOT NULL REFERENCES snippets(id),
    position INTEGER NOT NULL,
    is_representative INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (candidate_id, snippet_id)
);
CREATE TABLE IF NOT EXISTS plans (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id),
    name TEXT NOT NULL DEFAULT '',
    goal TEXT NOT NULL DEFAULT '',
    solution TEXT NOT NULL DEFAULT '',
    provenance TEXT NOT NULL DEFAULT 'empty'
        CHECK (provenance IN ('empty', 'from_selection', 'from_program', 'from_candidate')),
    source_id INTEGER,
    source_start INTEGER,
    source_end INTEGER,
    candidate_id INTEGER REFERENCES candidates(id),
    canvas_x REAL NOT NULL DEFAULT 0,
    canvas_y REAL NOT NULL DEFAULT 0,
    group_id INTEGER REFERENCES plan_groups(id),
    version INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS plan_spans (
    id INTEGER PRIMARY KEY,
    plan_id INTEGER NOT NULL REFERENCES plans(id),
    position INTEGER NOT NULL,
    start INTEGER NOT NULL,
    end INTEGER NOT NULL,
    note TEXT
);
CREATE TABLE IF NOT EXISTS plan_groups (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id),
    name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS embedding_cache (
    provider_id TEXT NOT NULL,
    content_hash TEXT NOT NULL,
    vector BLOB NOT NULL,
    PRIMARY KEY (provider_id, content_hash)
);
CREATE TABLE IF NOT EXISTS pipeline_stages (
    domain_id INTEGER NOT NULL REFERENCES domains(id),
    stage TEXT NOT NULL,
    completed_at TEXT NOT NULL,
    PRIMARY KEY (domain_id, stage)
);
"""


def pack_vector(values) -> bytes:
    return struct.pack(f"<{len(values)}f", *[float(v) for v in values])


def unpack_vector(blob: bytes) -> list[float]:
    return list(struct.unpack(f"<{len(blob) // 4}f", blob))


@dataclass(frozen=True)
class CorpusFilter:
    """Content and filename predicates applied during directory ingestion."""

    required_substrings: tuple[str, ...] = ()
    exclude_test_files: bool = True
    suffix: str = ".py"

    def accepts(self, path: Path, text: str) -> bool:
        if self.exclude_test_files and "test" in path.name.lower():
            return False
        return all(pattern in text for pattern in self.required_substrings)


@dataclass(frozen=True)
class SearchHit:
    entity_id: int
    match_count: int
    ordinal: int
    text: str


class Store:
    def __init__(self, path: str | Path):
        self.path = str(path)
        self._lock = threading.RLock()
        self._depth = 0
        self._conn = sqlite3.connect(
            self.path, check_same_thread=False, isolation_level=None
        )
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._conn.executescript(_SCHEMA)

    def close(self):
        with self._lock:
            self._conn.close()

    @contextmanager
    def transaction(self):
        """Serialized write transaction; rolls back on any exception.

        Nesting is supported through savepoints, so a caller can wrap several
        store operations into one atomic unit (the pipeline wraps each stage).
        """
        with self._lock:
            outermost = self._depth == 0
            self._depth += 1
            savepoint = f"sp_{self._depth}"
            cur = self._conn.cursor()
            try:
                if outermost:
                    cur.execute("BEGIN IMMEDIATE")
                else:
                    cur.execute(f"SAVEPOINT {savepoint}")
                yield cur
                if outermost:
                    self._conn.commit()
                else:
                    cur.execute(f"RELEASE SAVEPOINT {savepoint}")
            except BaseException:
                if outermost:
                    self._conn.rollback()
                else:
                    cur.execute(f"ROLLBACK TO SAVEPOINT {savepoint}")
                    cur.execute(f"RELEASE SAVEPOINT {savepoint}")
                raise
            finally:
                self._depth -= 1
                cur.close()

    def _query(self, sql: str, params=()):
        with self._lock:
            cur = self._conn.execute(sql, params)
            rows = cur.fetchall()
            cur.close()
            return rows

    # ------------------------------------------------------------------
    # Domains and use cases

    def add_domain(self, name: str, library_name: str, language: str = "python") -> Domain:
        if not library_name:
            raise PreconditionError("library_name must be non-empty")
        created = datetime.now(timezone.utc).isoformat()
        with self.transaction() as cur:
            cur.execute(
                "INSERT INTO domains (name, library_name, language, created_at) VALUES (?,?,?,?)",
                (name, library_name, language, created),
            )
            rid = cur.lastrowid
        return Domain(id=rid, name=name, library_name=library_name, language=language, created_at=created)

    def get_domain(self, domain_id: int) -> Domain:
        rows = self._query("SELECT * FROM domains WHERE id = ?", (domain_id,))
        if not rows:
            raise NotFoundError(f"domain {domain_id}")
        return _domain(rows[0])

    def find_domain(self, name: str) -> Domain | None:
        rows = self._query("SELECT * FROM domains WHERE name = ? ORDER BY id LIMIT 1", (name,))
        return _domain(rows[0]) if rows else None

    def list_domains(self) -> list[Domain]:
        return [_domain(r) for r in self._query("SELECT * FROM domains ORDER BY id")]

    def add_use_cases(self, domain_id: int, descriptions: list[str]) -> list[UseCase]:
        self.get_domain(domain_id)
        out = []
        with self.transaction() as cur:
            row = cur.execute(
                "SELECT COALESCE(MAX(ordinal), 0) AS m FROM use_cases WHERE domain_id = ?",
                (domain_id,),
            ).fetchone()
            next_ordinal = row["m"] + 1
            for off, desc in enumerate(descriptions):
                if not desc:
                    raise PreconditionError("use case description must be non-empty")
                cur.execute(
                    "INSERT INTO use_cases (domain_id, description, ordinal) VALUES (?,?,?)",
                    (domain_id, desc, next_ordinal + off),
                )
                out.append(UseCase(cur.lastrowid, domain_id, desc, next_ordinal + off))
        return out

    def list_use_cases(self, domain_id: int) -> list[UseCase]:
        self.get_domain(domain_id)
        rows = self._query(
            "SELECT * FROM use_cases WHERE domain_id = ? ORDER BY ordinal", (domain_id,)
        )
        return [UseCase(r["id"], r["domain_id"], r["description"], r["ordinal"]) for r in rows]

    def get_use_case(self, use_case_id: int) -> UseCase:
        rows = self._query("SELECT * FROM use_cases WHERE id = ?", (use_case_id,))
        if not rows:
            raise NotFoundError(f"use case {use_case_id}")
        r = rows[0]
        return UseCase(r["id"], r["domain_id"], r["description"], r["ordinal"])

    # ------------------------------------------------------------------
    # Programs

    def add_program(
        self,
        domain_id: int,
        use_case_id: int | None,
        raw_source: str,
        syntactically_valid: bool,
        origin: str,
        annotated_source: str = "",
    ) -> ExampleProgram:
        with self.transaction() as cur:
            cur.execute(
                "INSERT INTO programs (domain_id, use_case_id, raw_source, annotated_source,"
                " syntactically_valid, origin) VALUES (?,?,?,?,?,?)",
                (domain_id, use_case_id, raw_source, annotated_source,
                 int(syntactically_valid), origin),
            )
            rid = cur.lastrowid
        return ExampleProgram(
            id=rid, use_case_id=use_case_id, domain_id=domain_id, raw_source=raw_source,
            annotated_source=annotated_source, syntactically_valid=syntactically_valid,
            origin=origin,
        )

    def get_program(self, program_id: int) -> ExampleProgram:
        rows = self._query("SELECT * FROM programs WHERE id = ?", (program_id,))
        if not rows:
            raise NotFoundError(f"program {program_id}")
        return _program(rows[0])

    def list_programs(self, domain_id: int) -> list[ExampleProgram]:
        self.get_domain(domain_id)
        rows = self._query(
            "SELECT p.* FROM programs p LEFT JOIN use_cases u ON p.use_case_id = u.id"
            " WHERE p.domain_id = ? ORDER BY COALESCE(u.ordinal, p.id), p.id",
            (domain_id,),
        )
        return [_program(r) for r in rows]

    def set_annotated_source(self, program_id: int, annotated: str):
        with self.transaction() as cur:
            if cur.execute("UPDATE programs SET annotated_source = ? WHERE id = ?",
                           (annotated, program_id)).rowcount == 0:
                raise NotFoundError(f"program {program_id}")

    def set_validity(self, program_id: int, valid: bool):
        with self.transaction() as cur:
            if cur.execute("UPDATE programs SET syntactically_valid = ? WHERE id = ?",
                           (int(valid), program_id)).rowcount == 0:
                raise NotFoundError(f"program {program_id}")

    # ------------------------------------------------------------------
    # Snippets

    def replace_snippets(self, program_id: int, segmented: SegmentedProgram) -> list[Snippet]:
        """Persist a segmentation, preamble first, ordinals contiguous from 0."""
        self.get_program(program_id)
        segments = ([] if segmented.preamble is None else [segmented.preamble]) + list(segmented.snippets)
        out = []
        with self.transaction() as cur:
            cur.execute(
                "DELETE FROM snippet_spans WHERE snippet_id IN"
                " (SELECT id FROM snippets WHERE program_id = ?)",
                (program_id,),
            )
            cur.execute("DELETE FROM snippets WHERE program_id = ?", (program_id,))
            for ordinal, seg in enumerate(segments):
                cur.execute(
                    "INSERT INTO snippets (program_id, ordinal, goal, code, comment_text,"
                    " code_start, code_end) VALUES (?,?,?,?,?,?,?)",
                    (program_id, ordinal, seg.goal, seg.code, seg.comment_text,
                     seg.code_start, seg.code_end),
                )
                out.append(Snippet(
                    id=cur.lastrowid, program_id=program_id, ordinal=ordinal, goal=seg.goal,
                    code=seg.code, comment_text=seg.comment_text,
                    code_start=seg.code_start, code_end=seg.code_end,
                ))
        return out

    def get_snippet(self, snippet_id: int) -> Snippet:
        rows = self._query("SELECT * FROM snippets WHERE id = ?", (snippet_id,))
        if not rows:
            raise NotFoundError(f"snippet {snippet_id}")
        return self._snippet(rows[0])

    def list_snippets(self, domain_id: int) -> list[Snippet]:
        self.get_domain(domain_id)
        rows = self._query(
            "SELECT s.* FROM snippets s JOIN programs p ON s.program_id = p.id"
            " WHERE p.domain_id = ? ORDER BY s.program_id, s.ordinal",
            (domain_id,),
        )
        return [self._snippet(r) for r in rows]

    def _snippet(self, row) -> Snippet:
        spans = [
            CodeSpan(r["start"], r["end"], r["note"])
            for r in self._query(
                "SELECT * FROM snippet_spans WHERE snippet_id = ? ORDER BY position",
                (row["id"],),
            )
        ]
        emb = unpack_vector(row["embedding"]) if row["embedding"] is not None else None
        return Snippet(
            id=row["id"], program_id=row["program_id"], ordinal=row["ordinal"],
            goal=row["goal"], code=row["code"], comment_text=row["comment_text"],
            code_start=row["code_start"], code_end=row["code_end"],
            changeable_spans=spans, embedding=emb,
        )

    def set_snippet_spans(self, snippet_id: int, spans: list[CodeSpan]):
        snippet = self.get_snippet(snippet_id)
        code_len = len(snippet.code.encode("utf-8"))
        ordered = sorted(spans, key=lambda s: s.start)
        for i, span in enumerate(ordered):
            if span.end > code_len:
                raise PreconditionError(f"span {span} outside code of length {code_len}")
            if i and span.start < ordered[i - 1].end:
                raise PreconditionError("spans overlap")
        with self.transaction() as cur:
            cur.execute("DELETE FROM snippet_spans WHERE snippet_id = ?", (snippet_id,))
            for pos, span in enumerate(ordered):
                cur.execute(
                    "INSERT INTO snippet_spans (snippet_id, position, start, end, note)"
                    " VALUES (?,?,?,?,?)",
                    (snippet_id, pos, span.start, span.end, span.note),
                )

    def set_snippet_embedding(self, snippet_id: int, vector):
        with self.transaction() as cur:
            if cur.execute("UPDATE snippets SET embedding = ? WHERE id = ?",
                           (pack_vector(vector), snippet_id)).rowcount == 0:
                raise NotFoundError(f"snippet {snippet_id}")

    # ------------------------------------------------------------------
    # Embedding cache

    def cached_embedding(self, provider_id: str, content_hash: str) -> list[float] | None:
        rows = self._query(
            "SELECT vector FROM embedding_cache WHERE provider_id = ? AND content_hash = ?",
            (provider_id, content_hash),
        )
        return unpack_vector(rows[0]["vector"]) if rows else None

    def cache_embedding(self, provider_id: str, content_hash: str, vector):
        with self.transaction() as cur:
            cur.execute(
                "INSERT OR REPLACE INTO embedding_cache (provider_id, content_hash, vector)"
                " VALUES (?,?,?)",
                (provider_id, content_hash, pack_vector(vector)),
            )

    # ------------------------------------------------------------------
    # Candidates

    def add_candidate(
        self,
        domain_id: int,
        name: str,
        snippet_ids: list[int],
        centroid,
        representative_ids: list[int],
        pending_name: bool = False,
    ) -> PlanCandidate:
        if not snippet_ids:
            raise PreconditionError("candidate needs at least one member")
        if not set(representative_ids) <= set(snippet_ids):
            raise PreconditionError("representatives must be members")
        with self.transaction() as cur:
            cur.execute(
                "INSERT INTO candidates (domain_id, name, pending_name, centroid, size)"
                " VALUES (?,?,?,?,?)",
                (domain_id, name, int(pending_name), pack_vector(centroid), len(snippet_ids)),
            )
            cid = cur.lastrowid
            reps = set(representative_ids)
            for pos, sid in enumerate(snippet_ids):
                cur.execute(
                    "INSERT INTO candidate_members (candidate_id, snippet_id, position,"
                    " is_representative) VALUES (?,?,?,?)",
                    (cid, sid, pos, int(sid in reps)),
                )
        return PlanCandidate(
            id=cid, domain_id=domain_id, name=name, snippet_ids=list(snippet_ids),
            centroid=[float(v) for v in centroid], size=len(snippet_ids),
            representative_ids=list(representative_ids), pending_name=pending_name,
        )

    def get_candidate(self, candidate_id: int) -> PlanCandidate:
        rows = self._query("SELECT * FROM candidates WHERE id = ?", (candidate_id,))
        if not rows:
            raise NotFoundError(f"candidate {candidate_id}")
        return self._candidate(rows[0])

    def list_candidates(self, domain_id: int) -> list[PlanCandidate]:
        """Candidates ordered by size descending (ties by id)."""
        self.get_domain(domain_id)
        rows = self._query(
            "SELECT * FROM candidates WHERE domain_id = ? ORDER BY size DESC, id", (domain_id,)
        )
        return [self._candidate(r) for r in rows]

    def _candidate(self, row) -> PlanCandidate:
        members = self._query(
            "SELECT snippet_id, is_representative FROM candidate_members"
            " WHERE candidate_id = ? ORDER BY position",
            (row["id"],),
        )
        snippet_ids = [m["snippet_id"] for m in members]
        reps = [m["snippet_id"] for m in members if m["is_representative"]]
        return PlanCandidate(
            id=row["id"], domain_id=row["domain_id"], name=row["name"],
            snippet_ids=snippet_ids, centroid=unpack_vector(row["centroid"]),
            size=row["size"], representative_ids=reps,
            pending_name=bool(row["pending_name"]),
        )

    def rename_candidate(self, candidate_id: int, name: str, pending: bool = False):
        with self.transaction() as cur:
            if cur.execute(
                "UPDATE candidates SET name = ?, pending_name = ? WHERE id = ?",
                (name, int(pending), candidate_id),
            ).rowcount == 0:
                raise NotFoundError(f"candidate {candidate_id}")

    def clear_candidates(self, domain_id: int):
        with self.transaction() as cur:
            cur.execute(
                "DELETE FROM candidate_members WHERE candidate_id IN"
                " (SELECT id FROM candidates WHERE domain_id = ?)",
                (domain_id,),
            )
            cur.execute("DELETE FROM candidates WHERE domain_id = ?", (domain_id,))

    # ------------------------------------------------------------------
    # Plans

    def create_plan(self, plan: Plan) -> Plan:
        self._check_plan_spans(plan.solution, plan.changeable_areas)
        with self.transaction() as cur:
            cur.execute(
                "INSERT INTO plans (domain_id, name, goal, solution, provenance, source_id,"
                " source_start, source_end, candidate_id, canvas_x, canvas_y, group_id, version)"
                " VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?)",
                (plan.domain_id, plan.name, plan.goal, plan.solution, plan.provenance,
                 plan.source_id, plan.source_start, plan.source_end, plan.candidate_id,
                 plan.canvas_x, plan.canvas_y, plan.group_id, plan.version),
            )
            plan.id = cur.lastrowid
            self._write_plan_spans(cur, plan.id, plan.changeable_areas)
        return self.get_plan(plan.id)

    def get_plan(self, plan_id: int) -> Plan:
        rows = self._query("SELECT * FROM plans WHERE id = ?", (plan_id,))
        if not rows:
            raise NotFoundError(f"plan {plan_id}")
        return self._plan(rows[0])

    def list_plans(self, domain_id: int) -> list[Plan]:
        self.get_domain(domain_id)
        rows = self._query("SELECT * FROM plans WHERE domain_id = ? ORDER BY id", (domain_id,))
        return [self._plan(r) for r in rows]

    def _plan(self, row) -> Plan:
        spans = [
            CodeSpan(r["start"], r["end"], r["note"])
            for r in self._query(
                "SELECT * FROM plan_spans WHERE plan_id = ? ORDER BY position", (row["id"],)
            )
        ]
        return Plan(
            id=row["id"], domain_id=row["domain_id"], name=row["name"], goal=row["goal"],
            solution=row["solution"], changeable_areas=spans, provenance=row["provenance"],
            source_id=row["source_id"], source_start=row["source_start"],
            source_end=row["source_end"], candidate_id=row["candidate_id"],
            canvas_x=row["canvas_x"], canvas_y=row["canvas_y"], group_id=row["group_id"],
            version=row["version"],
        )

    @staticmethod
    def _check_plan_spans(solution: str, spans: list[CodeSpan]):
        limit = len(solution.encode("utf-8"))
        ordered = sorted(spans, key=lambda s: s.start)
        for i, span in enumerate(ordered):
            if span.end > limit:
                raise PreconditionError(f"span {span} outside solution of {limit} bytes")
            if i and span.start < ordered[i - 1].end:
                raise PreconditionError("changeable areas overlap")

    @staticmethod
    def _write_plan_spans(cur, plan_id: int, spans: list[CodeSpan]):
        cur.execute("DELETE FROM plan_spans WHERE plan_id = ?", (plan_id,))
        for pos, span in enumerate(sorted(spans, key=lambda s: s.start)):
            cur.execute(
                "INSERT INTO plan_spans (plan_id, position, start, end, note) VALUES (?,?,?,?,?)",
                (plan_id, pos, span.start, span.end, span.note),
            )

    def update_plan(self, plan_id: int, expected_version: int, **fields) -> Plan:
        """PATCH-style update with optimistic concurrency.

        Editing the solution drops (never clips) spans that no longer fit.
        """
        allowed = {"name", "goal", "solution", "canvas_x", "canvas_y"}
        unknown = set(fields) - allowed
        if unknown:
            raise PreconditionError(f"cannot update fields: {sorted(unknown)}")
        plan = self.get_plan(plan_id)
        if plan.version != expected_version:
            raise ConflictError(
                f"plan {plan_id} is at version {plan.version}, not {expected_version}"
            )
        for key, value in fields.items():
            setattr(plan, key, value)
        if "solution" in fields:
            limit = len(plan.solution.encode("utf-8"))
            plan.changeable_areas = [s for s in plan.changeable_areas if s.end <= limit]
        with self.transaction() as cur:
            cur.execute(
                "UPDATE plans SET name=?, goal=?, solution=?, canvas_x=?, canvas_y=?,"
                " version=version+1 WHERE id=? AND version=?",
                (plan.name, plan.goal, plan.solution, plan.canvas_x, plan.canvas_y,
                 plan_id, expected_version),
            )
            if cur.rowcount == 0:
                raise ConflictError(f"plan {plan_id} changed concurrently")
            self._write_plan_spans(cur, plan_id, plan.changeable_areas)
        return self.get_plan(plan_id)

    def duplicate_plan(self, plan_id: int, offset: float = 24.0) -> Plan:
        src = self.get_plan(plan_id)
        copy = Plan(
            id=0, domain_id=src.domain_id, name=src.name, goal=src.goal,
            solution=src.solution, changeable_areas=list(src.changeable_areas),
            provenance=src.provenance, source_id=src.source_id,
            source_start=src.source_start, source_end=src.source_end,
            candidate_id=src.candidate_id, canvas_x=src.canvas_x + offset,
            canvas_y=src.canvas_y + offset, group_id=src.group_id, version=0,
        )
        return self.create_plan(copy)

    def delete_plan(self, plan_id: int):
        plan = self.get_plan(plan_id)
        with self.transaction() as cur:
            cur.execute("DELETE FROM plan_spans WHERE plan_id = ?", (plan_id,))
            cur.execute("DELETE FROM plans WHERE id = ?", (plan_id,))
            if plan.group_id is not None:
                self._drop_group_if_empty(cur, plan.group_id)

    def add_plan_span(self, plan_id: int, span: CodeSpan) -> Plan:
        plan = self.get_plan(plan_id)
        limit = len(plan.solution.encode("utf-8"))
        if span.end > limit:
            raise PreconditionError(f"span outside solution of {limit} bytes")
        if any(span.overlaps(existing) for existing in plan.changeable_areas):
            raise PreconditionError("span overlaps an existing changeable area")
        spans = sorted(plan.changeable_areas + [span], key=lambda s: s.start)
        with self.transaction() as cur:
            self._write_plan_spans(cur, plan_id, spans)
            cur.execute("UPDATE plans SET version = version + 1 WHERE id = ?", (plan_id,))
        return self.get_plan(plan_id)

    def delete_plan_span(self, plan_id: int, index: int) -> Plan:
        plan = self.get_plan(plan_id)
        if not (0 <= index < len(plan.changeable_areas)):
            raise NotFoundError(f"plan {plan_id} has no changeable area {index}")
        spans = [s for i, s in enumerate(plan.changeable_areas) if i != index]
        with self.transaction() as cur:
            self._write_plan_spans(cur, plan_id, spans)
            cur.execute("UPDATE plans SET version = version + 1 WHERE id = ?", (plan_id,))
        return self.get_plan(plan_id)

    # ------------------------------------------------------------------
    # Groups

    def create_group(self, domain_id: int, name: str, plan_ids: list[int], move: bool = False) -> PlanGroup:
        if not plan_ids:
            raise PreconditionError("a group needs at least one plan")
        plans = [self.get_plan(pid) for pid in plan_ids]
        for plan in plans:
            if plan.group_id is not None and not move:
                raise ConflictError(f"plan {plan.id} already belongs to group {plan.group_id}")
        with self.transaction() as cur:
            cur.execute(
                "INSERT INTO plan_groups (domain_id, name) VALUES (?,?)", (domain_id, name)
            )
            gid = cur.lastrowid
            old_groups = {p.group_id for p in plans if p.group_id is not None}
            cur.execute(
                f"UPDATE plans SET group_id = ? WHERE id IN ({','.join('?' * len(plan_ids))})",
                [gid, *plan_ids],
            )
            for og in old_groups:
                self._drop_group_if_empty(cur, og)
        return self.get_group(gid)

    def get_group(self, group_id: int) -> PlanGroup:
        rows = self._query("SELECT * FROM plan_groups WHERE id = ?", (group_id,))
        if not rows:
            raise NotFoundError(f"group {group_id}")
        members = self._query(
            "SELECT id FROM plans WHERE group_id = ? ORDER BY id", (group_id,)
        )
        return PlanGroup(
            id=rows[0]["id"], domain_id=rows[0]["domain_id"], name=rows[0]["name"],
            plan_ids=[m["id"] for m in members],
        )

    def list_groups(self, domain_id: int) -> list[PlanGroup]:
        self.get_domain(domain_id)
        rows = self._query(
            "SELECT id FROM plan_groups WHERE domain_id = ? ORDER BY id", (domain_id,)
        )
        return [self.get_group(r["id"]) for r in rows]

    def update_group(self, group_id: int, name: str | None = None,
                     plan_ids: list[int] | None = None, move: bool = False) -> PlanGroup:
        group = self.get_group(group_id)
        if plan_ids is not None:
            if not plan_ids:
                raise PreconditionError("a group needs at least one plan")
            plans = [self.get_plan(pid) for pid in plan_ids]
            for plan in plans:
                if plan.group_id not in (None, group_id) and not move:
                    raise ConflictError(f"plan {plan.id} already belongs to group {plan.group_id}")
        with self.transaction() as cur:
            if name is not None:
                cur.execute("UPDATE plan_groups SET name = ? WHERE id = ?", (name, group_id))
            if plan_ids is not None:
                old_groups = {p.group_id for p in plans
                              if p.group_id is not None and p.group_id != group_id}
                cur.execute("UPDATE plans SET group_id = NULL WHERE group_id = ?", (group_id,))
                cur.execute(
                    f"UPDATE plans SET group_id = ? WHERE id IN ({','.join('?' * len(plan_ids))})",
                    [group_id, *plan_ids],
                )
                for og in old_groups:
                    self._drop_group_if_empty(cur, og)
        return self.get_group(group_id)

    def _drop_group_if_empty(self, cur, group_id: int):
        row = cur.execute(
            "SELECT COUNT(*) AS n FROM plans WHERE group_id = ?", (group_id,)
        ).fetchone()
        if row["n"] == 0:
            cur.execute("DELETE FROM plan_groups WHERE id = ?", (group_id,))

    # ------------------------------------------------------------------
    # Ingestion

    def ingest_corpus(self, domain_id: int, dir_path: str | Path,
                      corpus_filter: CorpusFilter | None = None) -> list[ExampleProgram]:
        """Store every file under ``dir_path`` passing the filter as an ingested program."""
        self.get_domain(domain_id)
        corpus_filter = corpus_filter or CorpusFilter()
        root = Path(dir_path)
        if not root.is_dir():
            raise FileNotFoundError(f"not a readable directory: {root}")
        out = []
        for path in sorted(root.rglob(f"*{corpus_filter.suffix}")):
            if not path.is_file():
                continue
            text = path.read_text(encoding="utf-8", errors="replace")
            if not corpus_filter.accepts(path, text):
                continue
            out.append(self.add_program(
                domain_id=domain_id, use_case_id=None, raw_source=text,
                syntactically_valid=validate_syntax(text), origin="ingested",
            ))
        return out

    # ------------------------------------------------------------------
    # Search

    def search(self, domain_id: int, query: str, scope: str) -> list[SearchHit]:
        """Case-insensitive substring search, ranked by (match count desc, ordinal asc)."""
        self.get_domain(domain_id)
        needle = query.strip().lower()
        if not needle:
            raise PreconditionError("query must be non-empty")
        if scope == "use_cases":
            rows = [(r["id"], r["ordinal"], r["description"])
                    for r in self._query(
                        "SELECT * FROM use_cases WHERE domain_id = ? ORDER BY ordinal",
                        (domain_id,))]
        elif scope == "programs":
            rows = [
                (r["id"], r["ord"], (r["annotated_source"] or r["raw_source"]))
                for r in self._query(
                    "SELECT p.*, COALESCE(u.ordinal, p.id) AS ord FROM programs p"
                    " LEFT JOIN use_cases u ON p.use_case_id = u.id"
                    " WHERE p.domain_id = ? ORDER BY ord, p.id",
                    (domain_id,))
            ]
        elif scope == "snippets":
            rows = [
                (r["id"], idx, f"{r['goal']}\n{r['code']}")
                for idx, r in enumerate(self._query(
                    "SELECT s.* FROM snippets s JOIN programs p ON s.program_id = p.id"
                    " WHERE p.domain_id = ? ORDER BY s.program_id, s.ordinal",
                    (domain_id,)))
            ]
        else:
            raise PreconditionError(f"unknown search scope: {scope}")

        hits = []
        for entity_id, ordinal, text in rows:
            count = text.lower().count(needle)
            if count:
                hits.append(SearchHit(entity_id, count, ordinal, text))
        hits.sort(key=lambda h: (-h.match_count, h.ordinal))
        return hits

    # ------------------------------------------------------------------
    # Export / import

    def export_plans(self, domain_id: int, fmt: str = "json") -> str:
        domain = self.get_domain(domain_id)
        plans = self.list_plans(domain_id)
        groups = self.list_groups(domain_id)
        group_names = {g.id: g.name for g in groups}
        if fmt == "json":
            doc = {
                "domain": domain.name,
                "plans": [
                    {
                        "name": p.name,
                        "goal": p.goal,
                        "solution": p.solution,
                        "changeable_areas": [
                            {"start": s.start, "end": s.end, "note": s.note}
                            for s in p.changeable_areas
                        ],
                        "group": group_names.get(p.group_id),
                    }
                    for p in plans
                ],
                "groups": [{"name": g.name, "plan_ids": g.plan_ids} for g in groups],
            }
            return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
        if fmt == "markdown":
            return self._export_markdown(domain, plans, groups)
        raise PreconditionError(f"unknown export format: {fmt}")

    def _export_markdown(self, domain: Domain, plans: list[Plan], groups: list[PlanGroup]) -> str:
        by_id = {p.id: p for p in plans}
        lines = [f"# Plans: {domain.name}", ""]

        def emit_plan(plan: Plan):
            lines.append(f"### {plan.name or '(unnamed plan)'}")
            lines.append("")
            if plan.goal:
                lines.append(f"Goal: {plan.goal}")
                lines.append("")
            lines.append(f"```{domain.language}")
            lines.append(plan.solution)
            lines.append("```")
            lines.append("")
            if plan.changeable_areas:
                lines.append("Changeable areas:")
                solution_bytes = plan.solution.encode("utf-8")
                for span in plan.changeable_areas:
                    frag = solution_bytes[span.start:span.end].decode("utf-8", errors="replace")
                    suffix = f" — {span.note}" if span.note else ""
                    lines.append(f"- `{frag}`{suffix}")
                lines.append("")

        grouped = set()
        for group in groups:
            lines.append(f"## {group.name}")
            lines.append("")
            for pid in group.plan_ids:
                grouped.add(pid)
                emit_plan(by_id[pid])
        ungrouped = [p for p in plans if p.id not in grouped]
        if ungrouped:
            lines.append("## Ungrouped")
            lines.append("")
            for plan in ungrouped:
                emit_plan(plan)
        return "\n".join(lines).rstrip("\n") + "\n"

    def import_plans(self, domain_id: int, document: str) -> list[Plan]:
        """Inverse of the JSON export: creates plans and groups in document order."""
        self.get_domain(domain_id)
        doc = json.loads(document)
        created = []
        name_to_plans: dict[str, list[int]] = {}
        for entry in doc.get("plans", []):
            plan = self.create_plan(Plan(
                id=0, domain_id=domain_id, name=entry.get("name", ""),
                goal=entry.get("goal", ""), solution=entry.get("solution", ""),
                changeable_areas=[
                    CodeSpan(s["start"], s["end"], s.get("note"))
                    for s in entry.get("changeable_areas", [])
                ],
            ))
            created.append(plan)
            group = entry.get("group")
            if group is not None:
                name_to_plans.setdefault(group, []).append(plan.id)
        for group in doc.get("groups", []):
            members = name_to_plans.get(group["name"], [])
            if members:
                self.create_group(domain_id, group["name"], members)
        return created

    # ------------------------------------------------------------------
    # Pipeline bookkeeping and canonical dumps

    def mark_stage(self, domain_id: int, stage: str):
        with self.transaction() as cur:
            cur.execute(
                "INSERT OR REPLACE INTO pipeline_stages (domain_id, stage, completed_at)"
                " VALUES (?,?,?)",
                (domain_id, stage, datetime.now(timezone.utc).isoformat()),
            )

    def completed_stages(self, domain_id: int) -> set[str]:
        return {
            r["stage"]
            for r in self._query(
                "SELECT stage FROM pipeline_stages WHERE domain_id = ?", (domain_id,)
            )
        }

    def counts(self, domain_id: int) -> dict:
        def one(sql, params):
            return self._query(sql, params)[0]["n"]

        return {
            "use_cases": one(
                "SELECT COUNT(*) AS n FROM use_cases WHERE domain_id = ?", (domain_id,)),
            "programs": one(
                "SELECT COUNT(*) AS n FROM programs WHERE domain_id = ?", (domain_id,)),
            "valid_programs": one(
                "SELECT COUNT(*) AS n FROM programs WHERE domain_id = ? AND syntactically_valid = 1",
                (domain_id,)),
            "snippets": one(
                "SELECT COUNT(*) AS n FROM snippets s JOIN programs p ON s.program_id = p.id"
                " WHERE p.domain_id = ?", (domain_id,)),
            "clusters": one(
                "SELECT COUNT(*) AS n FROM candidates WHERE domain_id = ?", (domain_id,)),
        }

    def dump_state(self) -> dict:
        """Canonical snapshot of every table, excluding volatile timestamps."""
        out = {}
        tables = {
            "domains": "SELECT id, name, library_name, language FROM domains ORDER BY id",
            "use_cases": "SELECT * FROM use_cases ORDER BY id",
            "programs": "SELECT * FROM programs ORDER BY id",
            "snippets": "SELECT * FROM snippets ORDER BY id",
            "snippet_spans": "SELECT * FROM snippet_spans ORDER BY id",
            "candidates": "SELECT * FROM candidates ORDER BY id",
            "candidate_members": "SELECT * FROM candidate_members ORDER BY candidate_id, position",
            "plans": "SELECT * FROM plans ORDER BY id",
            "plan_spans": "SELECT * FROM plan_spans ORDER BY id",
            "plan_groups": "SELECT * FROM plan_groups ORDER BY id",
        }
        for name, sql in tables.items():
            rows = []
            for row in self._query(sql):
                record = dict(row)
                for key, value in record.items():
                    if isinstance(value, bytes):
                        record[key] = value.hex()
                rows.append(record)
            out[name] = rows
        return out


def _domain(row) -> Domain:
    return Domain(
        id=row["id"], name=row["name"], library_name=row["library_name"],
        language=row["language"], created_at=row["created_at"],
    )


def _program(row) -> ExampleProgram:
    return ExampleProgram(
        id=row["id"], use_case_id=row["use_case_id"], domain_id=row["domain_id"],
        raw_source=row["raw_source"], annotated_source=row["annotated_source"],
        syntactically_valid=bool(row["syntactically_valid"]), origin=row["origin"],
    )
