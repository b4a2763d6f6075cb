import numpy as np
import pytest

from planforge.candidates import assemble_candidates
from planforge.clustering import ClusteringResult
from planforge.config import PipelineConfig
from planforge.errors import TransportError
from planforge.segmenter import segment


class NamingStub:
    def __init__(self, fail=False):
        self.fail = fail
        self.named = []

    def name_cluster(self, snippets):
        if self.fail:
            raise TransportError("naming offline")
        self.named.append([s.id for s in snippets])
        return f"Cluster of {len(snippets)}"


def seed_snippets(store, codes):
    domain = store.add_domain("d", "lib")
    case = store.add_use_cases(domain.id, ["t"])[0]
    annotated = "".join(f"# goal {i}\n{code}\n" for i, code in enumerate(codes))
    program = store.add_program(domain.id, case.id, annotated, True, "generated",
                                annotated_source=annotated)
    return domain, store.replace_snippets(program.id, segment(annotated))


def clustering_for(points, assignments, k):
    points = np.asarray(points, dtype=float)
    centroids = np.vstack([
        points[np.asarray(assignments) == c].mean(axis=0) for c in range(k)
    ])
    return ClusteringResult(
        k=k, assignments=np.asarray(assignments), centroids=centroids,
        silhouette_by_k={k: 0.5}, inertia=1.0,
    )


def test_small_cluster_keeps_all_members_as_representatives(store):
    domain, snippets = seed_snippets(store, ["a = 1", "b = 2", "c = 3"])
    points = np.array([[0.0], [0.1], [0.2]])
    result = clustering_for(points, [0, 0, 0], 1)
    cands = assemble_candidates(domain.id, result, snippets, points, store,
                                NamingStub(), PipelineConfig(n_representatives=4))
    assert len(cands) == 1
    assert cands[0].representative_ids == cands[0].snippet_ids
    assert cands[0].size == 3


def test_representative_order_matches_hand_distances(store):
    domain, snippets = seed_snippets(store, ["a = 1", "b = 2", "c = 3", "d = 4"])
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    result = clustering_for(points, [0, 0, 0, 0], 1)
    cands = assemble_candidates(domain.id, result, snippets, points, store,
                                NamingStub(), PipelineConfig(n_representatives=4))
    # centroid (1.5, 1.5): hand distances 2.121..., 1.581..., 1.581..., 4.949...
    ids = [s.id for s in snippets]
    expected = [ids[1], ids[2], ids[0], ids[3]]  # tie between 1 and 2 broken by id
    assert cands[0].snippet_ids == expected
    assert cands[0].representative_ids == expected


def test_candidates_ordered_by_size_desc(store):
    codes = [f"v{i} = {i}" for i in range(6)]
    domain, snippets = seed_snippets(store, codes)
    points = np.array([[0.0], [0.1], [0.2], [10.0], [10.1], [20.0]])
    result = clustering_for(points, [0, 0, 0, 1, 1, 2], 3)
    cands = assemble_candidates(domain.id, result, snippets, points, store,
                                NamingStub(), PipelineConfig(n_representatives=2))
    assert [c.size for c in cands] == [3, 2, 1]
    assert all(len(c.representative_ids) == min(2, c.size) for c in cands)


def test_partition_property_every_snippet_in_exactly_one(store):
    codes = [f"v{i} = {i}" for i in range(8)]
    domain, snippets = seed_snippets(store, codes)
    rng = np.random.default_rng(5)
    points = rng.normal(size=(8, 2))
    labels = [0, 1, 2, 0, 1, 2, 0, 1]
    result = clustering_for(points, labels, 3)
    cands = assemble_candidates(domain.id, result, snippets, points, store,
                                NamingStub(), PipelineConfig())
    seen = [sid for c in cands for sid in c.snippet_ids]
    assert sorted(seen) == sorted(s.id for s in snippets)


def test_naming_failure_keeps_placeholder(store):
    domain, snippets = seed_snippets(store, ["a = 1", "b = 2", "c = 3"])
    points = np.array([[0.0], [0.1], [5.0]])
    result = clustering_for(points, [0, 0, 1], 2)
    cands = assemble_candidates(domain.id, result, snippets, points, store,
                                NamingStub(fail=True), PipelineConfig())
    assert all(c.pending_name for c in cands)
    assert all(c.name.startswith("Unnamed plan candidate") for c in cands)


def test_deferred_naming_with_none_gateway(store):
    domain, snippets = seed_snippets(store, ["a = 1", "b = 2", "c = 3"])
    points = np.array([[0.0], [0.1], [5.0]])
    result = clustering_for(points, [0, 0, 1], 2)
    cands = assemble_candidates(domain.id, result, snippets, points, store,
                                None, PipelineConfig())
    assert all(c.pending_name for c in cands)


def test_top_clusters_flagged_by_order(store):
    codes = [f"v{i} = {i}" for i in range(12)]
    domain, snippets = seed_snippets(store, codes)
    rng = np.random.default_rng(9)
    points = rng.normal(size=(12, 1))
    # 12 singleton-ish clusters of descending size 3,2,...  build explicit labels
    labels = [0, 0, 0, 1, 1, 2, 3, 4, 5, 6, 7, 8]
    result = clustering_for(points, labels, 9)
    config = PipelineConfig(top_clusters=10)
    cands = assemble_candidates(domain.id, result, snippets, points, store,
                                NamingStub(), config)
    top = cands[: config.top_clusters]
    assert len(cands) == 9
    assert [c.size for c in top] == sorted((c.size for c in cands), reverse=True)[:10]
