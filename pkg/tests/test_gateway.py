import json
import threading
import time

import httpx
import pytest

from planforge import prompts
from planforge.config import PipelineConfig
from planforge.errors import (
    MalformedResponseError,
    PreconditionError,
    TransportError,
)
from planforge.gateway import (
    Gateway,
    MockProvider,
    RemoteProvider,
    cluster_prompt_text,
    extract_fenced_blocks,
    extract_final_output,
    parse_item_list,
    parse_name_line,
    strip_code_fence,
)
from planforge.models import Snippet
from planforge.prompts import PromptKind


class StubProvider:
    """Programmable provider that records every request it sees."""

    def __init__(self, respond, max_in_flight=8):
        self.respond = respond
        self.requests = []
        self.provider_id = "stub"
        self.max_in_flight = max_in_flight

    def complete(self, request):
        self.requests.append(request)
        return self.respond(request)


def make_snippet(goal, code, sid=1):
    return Snippet(id=sid, program_id=1, ordinal=0, goal=goal, code=code)


# ---------------------------------------------------------------------------
# Templates

def test_placeholders_per_kind():
    assert prompts.placeholders(PromptKind.USE_CASES) == ["DOMAIN_NAME"]
    assert prompts.placeholders(PromptKind.CODE_FOR_USE_CASE) == ["DOMAIN_NAME", "USE_CASE"]
    assert prompts.placeholders(PromptKind.SUBGOAL_ANNOTATE) == ["FULL_PROGRAM"]
    assert prompts.placeholders(PromptKind.CHANGEABLE_AREAS) == ["CODE_SNIPPET"]
    assert prompts.placeholders(PromptKind.CLUSTER_NAME) == ["PROGRAMS_IN_CLUSTER"]


@pytest.mark.parametrize("kind", list(PromptKind))
def test_render_delete_identity(kind):
    """Deleting the substituted values from the rendered text recovers the
    template body with its placeholder slots deleted (byte-exact)."""
    values = {name: f"@@{name.lower()}@@" for name in prompts.placeholders(kind)}
    request = prompts.render(kind, values)
    rendered = request.text
    for value in values.values():
        assert rendered.count(value) >= 1
        rendered = rendered.replace(value, "")
    body = prompts.TEMPLATE_BODIES[kind]
    for name in prompts.placeholders(kind):
        body = body.replace("{" + name + "}", "")
    assert rendered == body


def test_use_case_count_splice():
    default = prompts.render(PromptKind.USE_CASES, {"DOMAIN_NAME": "pandas"})
    assert "100 use cases" in default.text
    custom = prompts.render(PromptKind.USE_CASES, {"DOMAIN_NAME": "pandas"}, n_use_cases=40)
    assert "40 use cases" in custom.text
    assert "100" not in custom.text.split(".")[0]


def test_render_missing_value_rejected():
    with pytest.raises(KeyError):
        prompts.render(PromptKind.CODE_FOR_USE_CASE, {"DOMAIN_NAME": "x"})


def test_fixture_key_stable():
    r1 = prompts.render(PromptKind.SUBGOAL_ANNOTATE, {"FULL_PROGRAM": "x = 1"})
    r2 = prompts.render(PromptKind.SUBGOAL_ANNOTATE, {"FULL_PROGRAM": "x = 1"})
    r3 = prompts.render(PromptKind.SUBGOAL_ANNOTATE, {"FULL_PROGRAM": "x = 2"})
    assert r1.fixture_key() == r2.fixture_key() != r3.fixture_key()


# ---------------------------------------------------------------------------
# Parsers

def test_parse_item_list_numbering_and_bullets():
    text = "1. Reading a CSV file\n2) Filtering rows\n- Plotting data\n* Saving output"
    assert parse_item_list(text) == [
        "Reading a CSV file", "Filtering rows", "Plotting data", "Saving output",
    ]


def test_parse_item_list_drops_blanks():
    assert parse_item_list("1. a\n\n2. b\n   \n3. c") == ["a", "b", "c"]


def test_strip_code_fence_variants():
    assert strip_code_fence("```\nimport pandas\n```") == "import pandas"
    assert strip_code_fence("```python\nimport pandas\n```") == "import pandas"
    assert strip_code_fence("no fences here") == "no fences here"
    assert strip_code_fence("```python\nline1\nline2\n```") == "line1\nline2"
    assert strip_code_fence("``` only opener") == "``` only opener"


def test_extract_fenced_blocks():
    text = 'Some prose.\n```\n"data.csv"\n```\nmore\n```\ndf\n```\n'
    assert extract_fenced_blocks(text) == ['"data.csv"', "df"]
    assert extract_fenced_blocks("prose only, no blocks") == []
    assert extract_fenced_blocks("```inline```") == ["inline"]


def test_parse_name_line():
    assert parse_name_line("Name: Combining DataFrames") == "Combining DataFrames"
    assert parse_name_line("Name:   Reading Files  ") == "Reading Files"
    assert parse_name_line("Some preamble\nName: X\ntrailing") == "X"
    with pytest.raises(MalformedResponseError):
        parse_name_line("no name anywhere")


def test_extract_final_output():
    assert extract_final_output("reasoning...\nOUTPUT:\n42") == "42"
    assert extract_final_output("OUTPUT:\n") == ""
    table = "step 1\nstep 2\nOUTPUT:\ncol_a col_b\n1 2\n"
    assert extract_final_output(table) == "col_a col_b\n1 2\n"
    assert extract_final_output("OUTPUT: 42") == "42"
    with pytest.raises(MalformedResponseError):
        extract_final_output("no delimiter")


def test_parsers_total_on_junk():
    junk = "\x00\xff``` ``\nName\nOUTPUT"
    assert isinstance(parse_item_list(junk), list)
    assert isinstance(strip_code_fence(junk), str)
    assert isinstance(extract_fenced_blocks(junk), list)
    with pytest.raises(MalformedResponseError):
        parse_name_line(junk)
    with pytest.raises(MalformedResponseError):
        extract_final_output(junk)


# ---------------------------------------------------------------------------
# Gateway operations against a stub provider

def test_generate_use_cases_roundtrip(store):
    domain = store.add_domain("pandas", "pandas")
    listing = "\n".join(f"{i}. Task number {i}" for i in range(1, 101))
    gw = Gateway(StubProvider(lambda req: listing), store=store, config=PipelineConfig())
    cases = gw.generate_use_cases(domain)
    assert len(cases) == 100
    assert [c.ordinal for c in cases] == list(range(1, 101))
    assert cases[0].description == "Task number 1"


def test_generate_use_cases_blank_lines_dropped(store):
    domain = store.add_domain("d", "lib")
    gw = Gateway(
        StubProvider(lambda req: "1. alpha\n\n2. beta"),
        store=store,
        config=PipelineConfig(n_use_cases=4),
    )
    cases = gw.generate_use_cases(domain)
    assert [c.description for c in cases] == ["alpha", "beta"]


def test_generate_use_cases_malformed_threshold(store):
    domain = store.add_domain("d", "lib")
    gw = Gateway(
        StubProvider(lambda req: "1. only one"),
        store=store,
        config=PipelineConfig(n_use_cases=10),
    )
    with pytest.raises(MalformedResponseError):
        gw.generate_use_cases(domain)


def test_generate_program_fence_and_validity(store):
    domain = store.add_domain("d", "lib")
    case = store.add_use_cases(domain.id, ["do a thing"])[0]
    gw = Gateway(
        StubProvider(lambda req: "```\nimport pandas\n```"),
        store=store, config=PipelineConfig(),
    )
    program = gw.generate_program(case)
    assert program.raw_source == "import pandas"
    assert program.syntactically_valid

    case2 = store.add_use_cases(domain.id, ["another"])[0]
    gw2 = Gateway(StubProvider(lambda req: "def f(:"), store=store, config=PipelineConfig())
    program2 = gw2.generate_program(case2)
    assert program2.raw_source == "def f(:"
    assert not program2.syntactically_valid


def test_annotate_subgoals_stored(store):
    domain = store.add_domain("d", "lib")
    case = store.add_use_cases(domain.id, ["task"])[0]
    program = store.add_program(domain.id, case.id, "x = 1", True, "generated")
    gw = Gateway(
        StubProvider(lambda req: "# goal\nx = 1"), store=store, config=PipelineConfig()
    )
    annotated = gw.annotate_subgoals(program)
    assert annotated == "# goal\nx = 1"
    assert store.get_program(program.id).annotated_source == annotated


def test_extract_changeable_fragments():
    gw = Gateway(
        StubProvider(lambda req: '```\n"data.csv"\n```\n```\ndf\n```'),
        config=PipelineConfig(),
    )
    frags = gw.extract_changeable_fragments(make_snippet("g", 'df = read("data.csv")'))
    assert frags == ['"data.csv"', "df"]
    gw_empty = Gateway(StubProvider(lambda req: "nothing here"), config=PipelineConfig())
    assert gw_empty.extract_changeable_fragments(make_snippet("g", "x = 1")) == []


def test_name_cluster_prompt_assembly_and_parse():
    stub = StubProvider(lambda req: "Thinking...\nName: Combining DataFrames")
    gw = Gateway(stub, config=PipelineConfig())
    snippets = [
        make_snippet("merge tables", "c = a.merge(b)\n", sid=1),
        make_snippet("", "import pandas as pd\n", sid=2),
    ]
    assert gw.name_cluster(snippets) == "Combining DataFrames"
    sent = stub.requests[0]
    cluster_text = dict(sent.values)["PROGRAMS_IN_CLUSTER"]
    assert cluster_text == "# merge tables\nc = a.merge(b)\n\nimport pandas as pd"
    with pytest.raises(PreconditionError):
        gw.name_cluster([])


def test_cluster_prompt_text_blank_line_separated():
    text = cluster_prompt_text([
        make_snippet("a", "x = 1\n"), make_snippet("b", "y = 2\n"),
    ])
    assert text == "# a\nx = 1\n\n# b\ny = 2"


def test_explain_selection_span_in_prompt():
    stub = StubProvider(lambda req: "It prints both lines.")
    gw = Gateway(stub, config=PipelineConfig())
    code = "first = 1\nsecond = 2\n"
    start = code.index("first")
    end = code.index("second = 2") + len("second = 2")
    out = gw.explain_selection(code, start, end)
    assert out == "It prints both lines."
    rendered = stub.requests[0].text
    assert "first = 1\nsecond = 2" in rendered

    with pytest.raises(PreconditionError):
        gw.explain_selection(code, 5, 5)  # empty selection
    with pytest.raises(PreconditionError):
        gw.explain_selection(code, 0, 10_000)


def test_predict_output_delimiter():
    gw = Gateway(
        StubProvider(lambda req: "I reason step by step...\nOUTPUT:\n42"),
        config=PipelineConfig(),
    )
    assert gw.predict_output("print(42)") == "42"
    gw_bad = Gateway(StubProvider(lambda req: "no marker"), config=PipelineConfig())
    with pytest.raises(MalformedResponseError):
        gw_bad.predict_output("print(1)")
    with pytest.raises(PreconditionError):
        gw.predict_output("   ")


def test_rate_limit_bounds_in_flight():
    active = []
    peak = []
    lock = threading.Lock()

    def slow_response(request):
        with lock:
            active.append(1)
            peak.append(len(active))
        time.sleep(0.02)
        with lock:
            active.pop()
        return "Name: x"

    gw = Gateway(StubProvider(slow_response, max_in_flight=2), config=PipelineConfig())
    snippet = [make_snippet("g", "x = 1")]
    threads = [threading.Thread(target=lambda: gw.name_cluster(snippet)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert max(peak) <= 2


# ---------------------------------------------------------------------------
# Mock provider

def test_mock_provider_replays_and_errors(tmp_path):
    request = prompts.render(PromptKind.SUBGOAL_ANNOTATE, {"FULL_PROGRAM": "x = 1"})
    provider = MockProvider(tmp_path)
    with pytest.raises(TransportError):
        provider.complete(request)
    path = provider.fixture_path(request)
    path.parent.mkdir(parents=True)
    path.write_text("# goal\nx = 1", encoding="utf-8")
    assert provider.complete(request) == "# goal\nx = 1"
    assert provider.complete(request) == provider.complete(request)


# ---------------------------------------------------------------------------
# Remote provider retry behavior (fake transport, zero backoff)

def _chat_payload(content):
    return {"choices": [{"message": {"content": content}}]}


def test_remote_provider_retries_transport_then_succeeds(monkeypatch):
    monkeypatch.setenv("PLANFORGE_API_KEY", "k")
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503)
        return httpx.Response(200, json=_chat_payload("hello"))

    provider = RemoteProvider(
        PipelineConfig(), transport=httpx.MockTransport(handler), backoff=0.0
    )
    req = prompts.render(PromptKind.PREDICT_OUTPUT, {"CODE_SNIPPET": "x"})
    assert provider.complete(req) == "hello"
    assert len(calls) == 3


def test_remote_provider_gives_up_after_retries(monkeypatch):
    monkeypatch.setenv("PLANFORGE_API_KEY", "k")
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500)

    provider = RemoteProvider(
        PipelineConfig(), transport=httpx.MockTransport(handler), backoff=0.0
    )
    req = prompts.render(PromptKind.PREDICT_OUTPUT, {"CODE_SNIPPET": "x"})
    with pytest.raises(TransportError):
        provider.complete(req)
    assert len(calls) == 3  # 1 try + 2 retries


def test_remote_provider_no_retry_on_malformed(monkeypatch):
    monkeypatch.setenv("PLANFORGE_API_KEY", "k")
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(200, json={"unexpected": True})

    provider = RemoteProvider(
        PipelineConfig(), transport=httpx.MockTransport(handler), backoff=0.0
    )
    req = prompts.render(PromptKind.PREDICT_OUTPUT, {"CODE_SNIPPET": "x"})
    with pytest.raises(MalformedResponseError):
        provider.complete(req)
    assert len(calls) == 1


def test_remote_provider_requires_key(monkeypatch):
    monkeypatch.delenv("PLANFORGE_API_KEY", raising=False)
    provider = RemoteProvider(PipelineConfig(), backoff=0.0)
    req = prompts.render(PromptKind.PREDICT_OUTPUT, {"CODE_SNIPPET": "x"})
    with pytest.raises(TransportError):
        provider.complete(req)


def test_remote_provider_sends_prompt_and_temperature(monkeypatch):
    monkeypatch.setenv("PLANFORGE_API_KEY", "secret")
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content.decode())
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json=_chat_payload("ok"))

    provider = RemoteProvider(
        PipelineConfig(), transport=httpx.MockTransport(handler), backoff=0.0
    )
    req = prompts.render(PromptKind.PREDICT_OUTPUT, {"CODE_SNIPPET": "print(1)"})
    provider.complete(req)
    assert seen["auth"] == "Bearer secret"
    assert seen["body"]["temperature"] == 0.0
    assert "print(1)" in seen["body"]["messages"][0]["content"]
