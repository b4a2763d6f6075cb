"""Completion providers and the parsing layer between prompts and the store.

Every parser is total: it either returns a value or raises
MalformedResponseError, regardless of what text comes back. The mock provider
replays responses from a fixture directory keyed by (prompt kind, hash of the
substituted values), so any pipeline run against it is byte-reproducible.
"""

from __future__ import annotations

import os
import re
import threading
import time
from pathlib import Path

from . import prompts, segmenter
from .config import PipelineConfig
from .errors import MalformedResponseError, PreconditionError, TransportError
from .models import Domain, ExampleProgram, Snippet, UseCase
from .prompts import PromptKind, PromptRequest

_NUMBERING_RE = re.compile(r"^(?:\d+\s*[.)]\s*|[-*•]\s+)")
_OUTPUT_MARKER_RE = re.compile(r"^OUTPUT:", re.MULTILINE)


# ---------------------------------------------------------------------------
# Response parsers (pure)

def parse_item_list(text: str) -> list[str]:
    """One item per non-blank line, leading numbering and bullets stripped."""
    items = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        stripped = _NUMBERING_RE.sub("", stripped).strip()
        if stripped:
            items.append(stripped)
    return items


def strip_code_fence(text: str) -> str:
    """Remove at most one outermost triple-backtick fence pair.

    The opening fence may carry a language tag; anything without a complete
    fence pair is returned verbatim.
    """
    stripped = text.strip()
    if not (stripped.startswith("```") and stripped.endswith("```") and len(stripped) >= 6):
        return text
    first_nl = stripped.find("\n")
    if first_nl == -1:
        return stripped[3:-3]
    inner = stripped[first_nl + 1 : -3]
    if inner.endswith("\n"):
        inner = inner[:-1]
    return inner


def extract_fenced_blocks(text: str) -> list[str]:
    """Contents of every triple-backtick block, in order of appearance."""
    blocks = []
    pos = 0
    while True:
        start = text.find("```", pos)
        if start == -1:
            break
        end = text.find("```", start + 3)
        if end == -1:
            break
        raw = text[start + 3 : end]
        nl = raw.find("\n")
        if nl != -1:
            content = raw[nl + 1 :]
            if content.endswith("\n"):
                content = content[:-1]
        else:
            content = raw
        blocks.append(content)
        pos = end + 3
    return blocks


def parse_name_line(text: str) -> str:
    """Trimmed remainder of the first line starting with 'Name:'."""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("Name:"):
            return stripped[len("Name:") :].strip()
    raise MalformedResponseError("no 'Name:' line in response")


def extract_final_output(text: str) -> str:
    """Everything after the first line-initial 'OUTPUT:' marker, verbatim."""
    match = _OUTPUT_MARKER_RE.search(text)
    if match is None:
        raise MalformedResponseError("no 'OUTPUT:' delimiter in response")
    rest = text[match.end() :]
    if rest.startswith("\n"):
        return rest[1:]
    return rest.lstrip(" \t")


# ---------------------------------------------------------------------------
# Providers

class MockProvider:
    """Replays fixture files; identical inputs always yield identical outputs."""

    def __init__(self, fixture_dir: str | Path, provider_id: str = "mock", max_in_flight: int = 8):
        self.fixture_dir = Path(fixture_dir)
        self.provider_id = provider_id
        self.max_in_flight = max_in_flight

    def fixture_path(self, request: PromptRequest) -> Path:
        return self.fixture_dir / request.kind.value / f"{request.fixture_key()}.txt"

    def complete(self, request: PromptRequest) -> str:
        path = self.fixture_path(request)
        try:
            return path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise TransportError(
                f"no fixture for {request.kind.value} (expected {path})"
            ) from None


class RemoteProvider:
    """HTTPS chat-completion client with bounded retries on transport failures."""

    def __init__(
        self,
        config: PipelineConfig,
        provider_id: str = "remote",
        max_in_flight: int = 4,
        transport=None,
        backoff: float = 0.5,
    ):
        self.config = config
        self.provider_id = provider_id
        self.max_in_flight = max_in_flight
        self.backoff = backoff
        self._transport = transport

    def complete(self, request: PromptRequest) -> str:
        import httpx

        api_key = os.environ.get(self.config.api_key_env, "")
        if not api_key:
            raise TransportError(f"{self.config.api_key_env} is not set")
        payload = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": request.text}],
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        last_error: Exception | None = None
        for attempt in range(3):  # 1 try + 2 retries
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with httpx.Client(transport=self._transport, timeout=120.0) as client:
                    resp = client.post(self.config.endpoint, json=payload, headers=headers)
                if resp.status_code >= 500:
                    last_error = TransportError(f"provider returned {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise TransportError(f"provider returned {resp.status_code}: {resp.text}")
                body = resp.json()
                try:
                    return body["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError):
                    raise MalformedResponseError("completion payload missing message content")
            except httpx.HTTPError as exc:
                last_error = TransportError(str(exc))
        raise last_error if last_error else TransportError("provider unreachable")


# ---------------------------------------------------------------------------
# Gateway

class Gateway:
    """Renders prompts, sends them through a rate-limited provider, parses replies."""

    def __init__(self, provider, store=None, config: PipelineConfig | None = None):
        self.provider = provider
        self.store = store
        self.config = config or PipelineConfig()
        self._gate = threading.Semaphore(max(1, getattr(provider, "max_in_flight", 1)))

    def send(self, request: PromptRequest) -> str:
        with self._gate:
            return self.provider.complete(request)

    # -- pipeline operations

    def generate_use_cases(self, domain: Domain) -> list[UseCase]:
        request = prompts.render(
            PromptKind.USE_CASES,
            {"DOMAIN_NAME": domain.library_name},
            n_use_cases=self.config.n_use_cases,
        )
        items = parse_item_list(self.send(request))
        if len(items) < 0.5 * self.config.n_use_cases:
            raise MalformedResponseError(
                f"expected about {self.config.n_use_cases} use cases, parsed {len(items)}"
            )
        items = items[: self.config.n_use_cases]
        return self.store.add_use_cases(domain.id, items)

    def generate_program(self, use_case: UseCase) -> ExampleProgram:
        domain = self.store.get_domain(use_case.domain_id)
        request = prompts.render(
            PromptKind.CODE_FOR_USE_CASE,
            {"DOMAIN_NAME": domain.library_name, "USE_CASE": use_case.description},
        )
        code = strip_code_fence(self.send(request))
        if not code.strip():
            raise MalformedResponseError("empty program response")
        valid = segmenter.validate_syntax(code)
        return self.store.add_program(
            domain_id=domain.id,
            use_case_id=use_case.id,
            raw_source=code,
            syntactically_valid=valid,
            origin="generated",
        )

    def annotate_subgoals(self, program: ExampleProgram) -> str:
        if not program.raw_source:
            raise PreconditionError("program has no raw source")
        request = prompts.render(
            PromptKind.SUBGOAL_ANNOTATE, {"FULL_PROGRAM": program.raw_source}
        )
        annotated = strip_code_fence(self.send(request))
        if not annotated.strip():
            raise MalformedResponseError("empty annotation response")
        self.store.set_annotated_source(program.id, annotated)
        return annotated

    def extract_changeable_fragments(self, snippet: Snippet) -> list[str]:
        if not snippet.code.strip():
            raise PreconditionError("snippet code is empty")
        request = prompts.render(
            PromptKind.CHANGEABLE_AREAS, {"CODE_SNIPPET": snippet.code}
        )
        return extract_fenced_blocks(self.send(request))

    def name_cluster(self, snippets: list[Snippet]) -> str:
        if not snippets:
            raise PreconditionError("cannot name an empty cluster")
        request = prompts.render(
            PromptKind.CLUSTER_NAME,
            {"PROGRAMS_IN_CLUSTER": cluster_prompt_text(snippets)},
        )
        return parse_name_line(self.send(request))

    def explain_selection(self, code: str, start: int, end: int) -> str:
        code_bytes = code.encode("utf-8")
        if not (0 <= start < end <= len(code_bytes)):
            raise PreconditionError(f"selection [{start}, {end}) outside code")
        selection = code_bytes[start:end].decode("utf-8", errors="replace")
        request = prompts.render(
            PromptKind.EXPLAIN_SELECTION,
            {"FULL_PROGRAM": code, "SELECTION": selection},
        )
        return self.send(request)

    def predict_output(self, code: str) -> str:
        if not code.strip():
            raise PreconditionError("code is empty")
        request = prompts.render(PromptKind.PREDICT_OUTPUT, {"CODE_SNIPPET": code})
        return extract_final_output(self.send(request))


def cluster_prompt_text(snippets: list[Snippet]) -> str:
    """Goals as comments plus code, members separated by blank lines."""
    parts = []
    for snip in snippets:
        code = snip.code.rstrip("\n")
        if snip.goal:
            parts.append(f"# {snip.goal}\n{code}")
        else:
            parts.append(code)
    return "\n\n".join(parts)
