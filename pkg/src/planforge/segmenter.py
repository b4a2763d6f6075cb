"""Split subgoal-annotated programs into snippets, losslessly.

A segmentation boundary is a maximal run of comment-only lines whose next
non-blank line is code. The raw comment block is kept verbatim on each
segment so render() can reconstruct the input byte-for-byte; the goal string
is derived from it (markers stripped, lines joined with single spaces) but is
never used for re-rendering. Line classification goes through the lexer, so
comment markers inside string literals never split a program.
"""

from __future__ import annotations

import ast
import logging
from dataclasses import dataclass, field

from .models import CodeSpan
from .tokenizer import DEFAULT_COMMENT_MARKERS, classify_lines, iter_lines

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Segment:
    goal: str
    comment_text: str  # raw boundary comment block, "" for the preamble
    code: str  # raw code bytes up to the next boundary
    code_start: int  # byte offsets of `code` within the annotated source
    code_end: int


@dataclass(frozen=True)
class SegmentedProgram:
    preamble: Segment | None
    snippets: list[Segment] = field(default_factory=list)
    program_id: int | None = None


def validate_syntax(source: str) -> bool:
    """True iff the source parses as Python. Parse only; never executes."""
    try:
        ast.parse(source)
    except (SyntaxError, ValueError, RecursionError):
        return False
    return True


def segment(
    source: str,
    comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS,
    program_id: int | None = None,
) -> SegmentedProgram:
    lines = list(iter_lines(source))
    kinds = classify_lines(source, comment_markers)

    runs = _comment_runs(kinds)
    boundaries = [r for r in runs if _is_boundary(r, kinds)]

    byte_of = _byte_offset_fn(source)
    segments: list[Segment] = []
    preamble: Segment | None = None

    if not boundaries:
        if source:
            preamble = Segment("", "", source, 0, byte_of(len(source)))
        return SegmentedProgram(preamble=preamble, snippets=[], program_id=program_id)

    first_run_start = boundaries[0][0]
    if first_run_start > 0:
        start = lines[0][0]
        end = lines[first_run_start - 1][1]
        preamble = Segment("", "", source[start:end], byte_of(start), byte_of(end))

    for idx, (run_start, run_end) in enumerate(boundaries):
        comment_start = lines[run_start][0]
        comment_end = lines[run_end][1]
        code_start = comment_end
        if idx + 1 < len(boundaries):
            code_end = lines[boundaries[idx + 1][0]][0] if boundaries[idx + 1][0] < len(lines) else len(source)
        else:
            code_end = len(source)
        goal = _derive_goal(source[comment_start:comment_end], comment_markers)
        segments.append(
            Segment(
                goal=goal,
                comment_text=source[comment_start:comment_end],
                code=source[code_start:code_end],
                code_start=byte_of(code_start),
                code_end=byte_of(code_end),
            )
        )
    return SegmentedProgram(preamble=preamble, snippets=segments, program_id=program_id)


def render(segmented: SegmentedProgram) -> str:
    """Re-emit the exact annotated source the segmentation came from."""
    parts = []
    if segmented.preamble is not None:
        parts.append(segmented.preamble.code)
    for seg in segmented.snippets:
        parts.append(seg.comment_text)
        parts.append(seg.code)
    return "".join(parts)


def localize_fragments(
    snippet_code: str,
    fragments: list[str],
    discard_log: list[str] | None = None,
) -> list[CodeSpan]:
    """Map fragment strings to byte spans in ``snippet_code``.

    First exact occurrence wins; misses are dropped (and reported through the
    logger / optional discard list); overlapping spans are merged.
    """
    code_bytes = snippet_code.encode("utf-8")
    spans: list[tuple[int, int]] = []
    for frag in fragments:
        if not frag:
            continue
        pos = code_bytes.find(frag.encode("utf-8"))
        if pos < 0:
            logger.debug("fragment not found in snippet, dropped: %r", frag)
            if discard_log is not None:
                discard_log.append(frag)
            continue
        spans.append((pos, pos + len(frag.encode("utf-8"))))

    spans.sort()
    merged: list[list[int]] = []
    for start, end in spans:
        if merged and start < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [CodeSpan(s, e) for s, e in merged]


def _comment_runs(kinds: list[str]) -> list[tuple[int, int]]:
    """Maximal [start, end] line-index ranges of consecutive comment lines."""
    runs = []
    i = 0
    while i < len(kinds):
        if kinds[i] == "comment":
            j = i
            while j + 1 < len(kinds) and kinds[j + 1] == "comment":
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def _is_boundary(run: tuple[int, int], kinds: list[str]) -> bool:
    """A run is a boundary iff the next non-blank line after it is code."""
    i = run[1] + 1
    while i < len(kinds) and kinds[i] == "blank":
        i += 1
    return i < len(kinds) and kinds[i] == "code"


def _derive_goal(comment_block: str, markers: tuple[str, ...]) -> str:
    ordered = sorted(markers, key=len, reverse=True)
    parts = []
    for line in comment_block.splitlines():
        text = line.strip()
        changed = True
        while changed:
            changed = False
            for marker in ordered:
                if text.startswith(marker):
                    text = text[len(marker):]
                    changed = True
        text = text.strip()
        if text:
            parts.append(text)
    return " ".join(parts)


def _byte_offset_fn(source: str):
    if source.isascii():
        return lambda i: i
    offsets = [0] * (len(source) + 1)
    total = 0
    for idx, ch in enumerate(source):
        offsets[idx] = total
        total += len(ch.encode("utf-8"))
    offsets[len(source)] = total
    return lambda i: offsets[i]
