import random

import pytest
from fastapi.testclient import TestClient

from planforge.api import create_app
from planforge.config import PipelineConfig
from planforge.errors import TransportError
from planforge.gateway import Gateway
from planforge.models import Plan
from planforge.segmenter import segment
from planforge.store import Store


class CountingProvider:
    def __init__(self, respond):
        self.respond = respond
        self.calls = 0
        self.provider_id = "counting"
        self.max_in_flight = 4

    def complete(self, request):
        self.calls += 1
        return self.respond(request)


@pytest.fixture()
def client(populated, pipeline_config):
    provider = CountingProvider(lambda req: "Explanation text.\nOUTPUT:\n42")
    gateway = Gateway(provider, store=populated["store"], config=pipeline_config)
    app = create_app(populated["store"], gateway, pipeline_config)
    with TestClient(app) as c:
        c.provider = provider
        c.domain_id = populated["domain"].id
        yield c


def first_program(client):
    programs = client.get(f"/domains/{client.domain_id}/programs").json()
    return next(p for p in programs if p["annotated_source"])


# ---------------------------------------------------------------------------
# Browsing

def test_domains_listing(client):
    domains = client.get("/domains").json()
    assert len(domains) == 1
    assert domains[0]["library_name"] == "pandas"


def test_use_cases_full_listing(client):
    rows = client.get(f"/domains/{client.domain_id}/use-cases").json()
    assert len(rows) == 100
    assert rows[0]["ordinal"] == 1
    assert all(r["program_id"] for r in rows)


def test_use_cases_search_param(client):
    rows = client.get(f"/domains/{client.domain_id}/use-cases", params={"q": "Sorting"}).json()
    assert rows
    assert all("sorting" in r["description"].lower() for r in rows)


def test_programs_search_delegates(client):
    rows = client.get(f"/domains/{client.domain_id}/programs", params={"q": ".merge"}).json()
    assert rows
    assert all(".merge" in r["annotated_source"] for r in rows)


def test_unknown_domain_404_payload(client):
    resp = client.get("/domains/999/programs")
    assert resp.status_code == 404
    body = resp.json()
    assert body["code"] == 404 and "message" in body


# ---------------------------------------------------------------------------
# Suggestions

def test_suggestions_size_descending_then_410(client):
    sizes = []
    headers = {"X-Session-Id": "suggest-walk"}
    while True:
        resp = client.get(f"/domains/{client.domain_id}/candidates/next", headers=headers)
        if resp.status_code == 410:
            break
        body = resp.json()
        sizes.append(body["size"])
        rep = body["representative"]
        assert rep["code"]
        assert {"snippet_id", "goal", "spans"} <= set(rep)
    assert sizes == sorted(sizes, reverse=True)
    assert len(sizes) >= 2


def test_suggestions_are_session_scoped(client):
    first_a = client.get(f"/domains/{client.domain_id}/candidates/next",
                         headers={"X-Session-Id": "sa"}).json()["id"]
    second_a = client.get(f"/domains/{client.domain_id}/candidates/next",
                          headers={"X-Session-Id": "sa"}).json()["id"]
    first_b = client.get(f"/domains/{client.domain_id}/candidates/next",
                         headers={"X-Session-Id": "sb"}).json()["id"]
    assert first_a != second_a
    assert first_b == first_a  # fresh session starts over at the largest


# ---------------------------------------------------------------------------
# Plan creation

def test_create_from_selection_copies_bytes_and_name(client):
    program = first_program(client)
    text = program["annotated_source"].encode("utf-8")
    start, end = 10, 20
    resp = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_selection",
        "source_ref": program["id"], "selection": {"start": start, "end": end},
    })
    assert resp.status_code == 201
    plan = resp.json()
    assert plan["solution"].encode("utf-8") == text[start:end]
    case = next(
        r for r in client.get(f"/domains/{client.domain_id}/use-cases").json()
        if r["program_id"] == program["id"]
    )
    assert plan["name"] == case["description"]
    assert plan["provenance"] == "from_selection"


def test_create_from_program(client):
    program = first_program(client)
    plan = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_program",
        "source_ref": program["id"],
    }).json()
    assert plan["solution"] == program["annotated_source"]
    assert plan["name"]


def test_create_empty_plan(client):
    plan = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "empty",
    }).json()
    assert plan["name"] == "" and plan["goal"] == "" and plan["solution"] == ""
    assert plan["changeable_areas"] == []
    assert plan["version"] == 0


def test_create_from_candidate_copies_representative(client):
    suggestion = client.get(f"/domains/{client.domain_id}/candidates/next",
                            headers={"X-Session-Id": "cand-copy"}).json()
    plan = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_candidate",
        "source_ref": suggestion["id"],
    }).json()
    rep = suggestion["representative"]
    assert plan["solution"] == rep["code"]
    assert plan["goal"] == rep["goal"]
    assert plan["name"] == suggestion["name"]
    assert plan["candidate_id"] == suggestion["id"]
    assert plan["changeable_areas"] == rep["spans"]


def test_create_invalid_selection_422(client):
    program = first_program(client)
    resp = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_selection",
        "source_ref": program["id"], "selection": {"start": 50, "end": 10},
    })
    assert resp.status_code == 422


def test_create_bad_source_404(client):
    resp = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_program", "source_ref": 99999,
    })
    assert resp.status_code == 404


# ---------------------------------------------------------------------------
# Plan editing

def make_plan(client, solution="0123456789"):
    plan = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "empty",
    }).json()
    return client.patch(f"/plans/{plan['id']}", json={
        "version": 0, "solution": solution,
    }).json()


def test_patch_version_conflict(client):
    plan = make_plan(client)
    ok = client.patch(f"/plans/{plan['id']}", json={"version": plan["version"], "name": "a"})
    assert ok.status_code == 200
    stale = client.patch(f"/plans/{plan['id']}", json={"version": plan["version"], "name": "b"})
    assert stale.status_code == 409


def test_patch_solution_drop_only_rule(client):
    plan = make_plan(client)
    client.post(f"/plans/{plan['id']}/changeable-areas", json={"start": 0, "end": 3})
    client.post(f"/plans/{plan['id']}/changeable-areas", json={"start": 7, "end": 10})
    current = client.get(f"/plans/{plan['id']}").json()
    shrunk = client.patch(f"/plans/{plan['id']}", json={
        "version": current["version"], "solution": "0123456",
    }).json()
    assert [(s["start"], s["end"]) for s in shrunk["changeable_areas"]] == [(0, 3)]


def test_duplicate_then_edit_copy(client):
    plan = make_plan(client)
    copy = client.post(f"/plans/{plan['id']}/duplicate").json()
    assert copy["id"] != plan["id"]
    assert copy["canvas_x"] == plan["canvas_x"] + 24.0
    client.patch(f"/plans/{copy['id']}", json={"version": 0, "name": "edited copy"})
    original = client.get(f"/plans/{plan['id']}").json()
    assert original["name"] == plan["name"]


def test_delete_plan(client):
    plan = make_plan(client)
    assert client.delete(f"/plans/{plan['id']}").status_code == 204
    assert client.get(f"/plans/{plan['id']}").status_code == 404


def test_changeable_area_overlap_rejected(client):
    plan = make_plan(client, solution="a" * 25)
    assert client.post(f"/plans/{plan['id']}/changeable-areas",
                       json={"start": 10, "end": 20}).status_code == 201
    resp = client.post(f"/plans/{plan['id']}/changeable-areas",
                       json={"start": 15, "end": 22})
    assert resp.status_code == 422
    out_of_bounds = client.post(f"/plans/{plan['id']}/changeable-areas",
                                json={"start": 24, "end": 40})
    assert out_of_bounds.status_code == 422


def test_changeable_area_add_delete_inverse(client):
    plan = make_plan(client)
    client.post(f"/plans/{plan['id']}/changeable-areas", json={"start": 2, "end": 4})
    with_span = client.get(f"/plans/{plan['id']}").json()
    assert len(with_span["changeable_areas"]) == 1
    client.delete(f"/plans/{plan['id']}/changeable-areas/0")
    assert client.get(f"/plans/{plan['id']}").json()["changeable_areas"] == []


# ---------------------------------------------------------------------------
# Similar values and context

def test_similar_for_candidate_linked_plan(client):
    suggestion = client.get(f"/domains/{client.domain_id}/candidates/next",
                            headers={"X-Session-Id": "sim"}).json()
    plan = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_candidate",
        "source_ref": suggestion["id"],
    }).json()
    body = client.get(f"/plans/{plan['id']}/similar", params={"component": "goal"}).json()
    assert body["values"]
    assert len(body["values"]) <= suggestion["size"]
    assert len(body["values"]) == len(set(body["values"]))  # deduplicated


def test_similar_keyword_search_for_unlinked_plan(client):
    plan = client.post("/plans", json={"domain_id": client.domain_id, "mode": "empty"}).json()
    client.patch(f"/plans/{plan['id']}", json={"version": 0, "goal": "merge tables"})
    body = client.get(f"/plans/{plan['id']}/similar", params={"component": "goal"}).json()
    assert body["values"]
    assert len(body["values"]) <= 10
    assert any("merge" in v.lower() or "join" in v.lower() for v in body["values"])


def test_similar_empty_component_empty_list(client):
    plan = client.post("/plans", json={"domain_id": client.domain_id, "mode": "empty"}).json()
    body = client.get(f"/plans/{plan['id']}/similar", params={"component": "goal"}).json()
    assert body["values"] == []


def test_context_for_selection_plan(client):
    program = first_program(client)
    plan = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_selection",
        "source_ref": program["id"], "selection": {"start": 5, "end": 25},
    }).json()
    ctx = client.get(f"/plans/{plan['id']}/context").json()
    assert ctx["program_id"] == program["id"]
    assert (ctx["start"], ctx["end"]) == (5, 25)
    assert ctx["annotated_source"] == program["annotated_source"]


def test_context_for_candidate_plan_points_at_snippet(client, populated):
    suggestion = client.get(f"/domains/{client.domain_id}/candidates/next",
                            headers={"X-Session-Id": "ctx"}).json()
    plan = client.post("/plans", json={
        "domain_id": client.domain_id, "mode": "from_candidate",
        "source_ref": suggestion["id"],
    }).json()
    ctx = client.get(f"/plans/{plan['id']}/context").json()
    window = ctx["annotated_source"].encode("utf-8")[ctx["start"]:ctx["end"]]
    assert window.decode("utf-8") == suggestion["representative"]["code"]


def test_context_empty_plan_404(client):
    plan = client.post("/plans", json={"domain_id": client.domain_id, "mode": "empty"}).json()
    assert client.get(f"/plans/{plan['id']}/context").status_code == 404


# ---------------------------------------------------------------------------
# Groups

def test_group_create_and_regroup(client):
    p1 = make_plan(client)
    p2 = make_plan(client)
    p3 = make_plan(client)
    group = client.post("/groups", json={
        "domain_id": client.domain_id, "name": "combining",
        "plan_ids": [p1["id"], p2["id"]],
    }).json()
    assert client.get(f"/plans/{p1['id']}").json()["group_id"] == group["id"]

    conflict = client.post("/groups", json={
        "domain_id": client.domain_id, "name": "again", "plan_ids": [p1["id"]],
    })
    assert conflict.status_code == 409

    moved = client.post("/groups", json={
        "domain_id": client.domain_id, "name": "moved",
        "plan_ids": [p1["id"], p3["id"]], "move": True,
    }).json()
    groups = {g["id"]: g for g in client.get(
        f"/domains/{client.domain_id}/groups").json()}
    assert groups[group["id"]]["plan_ids"] == [p2["id"]]
    assert sorted(groups[moved["id"]]["plan_ids"]) == sorted([p1["id"], p3["id"]])


def test_group_empty_rejected(client):
    resp = client.post("/groups", json={
        "domain_id": client.domain_id, "name": "empty", "plan_ids": [],
    })
    assert resp.status_code == 422


# ---------------------------------------------------------------------------
# LLM delegations

def test_explain_cached_by_content(client):
    body = {"code": "x = 1\ny = 2\n", "start": 0, "end": 5}
    first = client.post("/explain", json=body)
    assert first.status_code == 200
    calls_after_first = client.provider.calls
    second = client.post("/explain", json=body)
    assert second.json() == first.json()
    assert client.provider.calls == calls_after_first  # served from cache


def test_explain_bad_span_422(client):
    resp = client.post("/explain", json={"code": "x = 1", "start": 3, "end": 3})
    assert resp.status_code == 422


def test_predict_output_extracts_delimited(client):
    resp = client.post("/predict-output", json={"code": "print(42)"})
    assert resp.status_code == 200
    assert resp.json()["output"] == "42"


def test_provider_failure_502(populated, pipeline_config):
    def boom(request):
        raise TransportError("provider down")

    gateway = Gateway(CountingProvider(boom), store=populated["store"],
                      config=pipeline_config)
    app = create_app(populated["store"], gateway, pipeline_config)
    with TestClient(app) as client:
        resp = client.post("/predict-output", json={"code": "print(1)"})
        assert resp.status_code == 502
        assert resp.json()["code"] == 502


# ---------------------------------------------------------------------------
# Random-walk fuzz: referential integrity must survive any valid sequence

def check_integrity(store, domain_id):
    plans = store.list_plans(domain_id)
    groups = store.list_groups(domain_id)
    group_ids = {g.id for g in groups}
    for plan in plans:
        solution_len = len(plan.solution.encode("utf-8"))
        previous_end = -1
        for span in plan.changeable_areas:
            assert 0 <= span.start < span.end <= solution_len
            assert span.start >= previous_end
            previous_end = span.end
        if plan.group_id is not None:
            assert plan.group_id in group_ids
    for group in groups:
        assert group.plan_ids, "groups must never be empty"
        for pid in group.plan_ids:
            plan = store.get_plan(pid)
            assert plan.group_id == group.id


def test_fuzz_500_random_valid_requests(client, populated):
    rng = random.Random(2024)
    store = populated["store"]
    domain_id = client.domain_id
    plan_versions: dict[int, int] = {}

    def refresh(plan):
        plan_versions[plan["id"]] = plan["version"]

    for step in range(500):
        action = rng.choice(
            ["create", "patch", "span_add", "span_del", "duplicate",
             "delete", "group", "suggest", "browse"]
        )
        ids = list(plan_versions)
        if action == "create" or not ids:
            mode = rng.choice(["empty", "from_program", "from_candidate"])
            payload = {"domain_id": domain_id, "mode": mode}
            if mode == "from_program":
                payload["source_ref"] = first_program(client)["id"]
            elif mode == "from_candidate":
                cands = store.list_candidates(domain_id)
                payload["source_ref"] = rng.choice(cands).id
            resp = client.post("/plans", json=payload)
            assert resp.status_code == 201
            refresh(resp.json())
        elif action == "patch":
            pid = rng.choice(ids)
            resp = client.patch(f"/plans/{pid}", json={
                "version": plan_versions[pid],
                "solution": "solution_" + "x" * rng.randint(0, 30),
                "canvas_x": rng.uniform(0, 2000),
            })
            assert resp.status_code in (200, 409)
            if resp.status_code == 200:
                refresh(resp.json())
        elif action == "span_add":
            pid = rng.choice(ids)
            resp = client.post(f"/plans/{pid}/changeable-areas", json={
                "start": rng.randint(0, 12), "end": rng.randint(1, 16),
            })
            assert resp.status_code in (201, 422)
            if resp.status_code == 201:
                refresh(resp.json())
        elif action == "span_del":
            pid = rng.choice(ids)
            resp = client.delete(f"/plans/{pid}/changeable-areas/0")
            assert resp.status_code in (200, 404)
            if resp.status_code == 200:
                refresh(resp.json())
        elif action == "duplicate":
            pid = rng.choice(ids)
            resp = client.post(f"/plans/{pid}/duplicate")
            assert resp.status_code == 201
            refresh(resp.json())
        elif action == "delete":
            pid = rng.choice(ids)
            assert client.delete(f"/plans/{pid}").status_code == 204
            del plan_versions[pid]
        elif action == "group":
            free = [
                p.id for p in store.list_plans(domain_id) if p.group_id is None
            ]
            if len(free) >= 2:
                chosen = rng.sample(free, 2)
                resp = client.post("/groups", json={
                    "domain_id": domain_id, "name": f"g{step}", "plan_ids": chosen,
                })
                assert resp.status_code == 201
        elif action == "suggest":
            resp = client.get(f"/domains/{domain_id}/candidates/next",
                              headers={"X-Session-Id": "fuzz"})
            assert resp.status_code in (200, 410)
        else:
            assert client.get(f"/domains/{domain_id}/programs").status_code == 200

        if step % 50 == 0:
            check_integrity(store, domain_id)

    check_integrity(store, domain_id)
