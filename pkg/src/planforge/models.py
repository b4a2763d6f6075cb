"""Domain types shared across the package.

Offsets are always byte offsets into UTF-8 text; spans are half-open
[start, end).
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CodeSpan:
    start: int
    end: int
    note: str | None = None

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def overlaps(self, other: "CodeSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass
class Domain:
    id: int
    name: str
    library_name: str
    language: str = "python"
    created_at: str = ""


@dataclass
class UseCase:
    id: int
    domain_id: int
    description: str
    ordinal: int  # 1-based position in the generated list


@dataclass
class ExampleProgram:
    id: int
    use_case_id: int | None
    domain_id: int
    raw_source: str
    annotated_source: str = ""
    syntactically_valid: bool = False
    origin: str = "generated"  # generated | ingested


@dataclass
class Snippet:
    id: int
    program_id: int
    ordinal: int  # 0-based order within program
    goal: str  # "" for the unannotated preamble
    code: str  # excludes the subgoal comment line(s)
    comment_text: str = ""  # raw comment block, kept for lossless re-rendering
    code_start: int = 0  # byte range of `code` within the annotated source
    code_end: int = 0
    changeable_spans: list[CodeSpan] = field(default_factory=list)
    embedding: list[float] | None = None


@dataclass
class PlanCandidate:
    id: int
    domain_id: int
    name: str
    snippet_ids: list[int]
    centroid: list[float]
    size: int
    representative_ids: list[int]
    pending_name: bool = False


@dataclass
class Plan:
    id: int
    domain_id: int
    name: str = ""
    goal: str = ""
    solution: str = ""
    changeable_areas: list[CodeSpan] = field(default_factory=list)
    provenance: str = "empty"  # empty | from_selection | from_program | from_candidate
    source_id: int | None = None
    source_start: int | None = None
    source_end: int | None = None
    candidate_id: int | None = None
    canvas_x: float = 0.0
    canvas_y: float = 0.0
    group_id: int | None = None
    version: int = 0


@dataclass
class PlanGroup:
    id: int
    domain_id: int
    name: str
    plan_ids: list[int] = field(default_factory=list)
