"""Turn a clustering result into named, persisted plan candidates."""

from __future__ import annotations

import logging

import numpy as np

from .config import PipelineConfig
from .clustering import ClusteringResult
from .errors import MalformedResponseError, TransportError
from .models import PlanCandidate, Snippet

logger = logging.getLogger(__name__)


def assemble_candidates(
    domain_id: int,
    clustering: ClusteringResult,
    snippets: list[Snippet],
    reduced: np.ndarray,
    store,
    gateway,
    config: PipelineConfig,
) -> list[PlanCandidate]:
    """One candidate per cluster, ordered by size descending.

    Members are stored in ascending distance to the centroid (ties by snippet
    id); the first ``n_representatives`` are the representatives, whose goals
    and code feed the naming prompt. Naming failures degrade to a placeholder
    name with a pending flag instead of aborting the run; passing
    ``gateway=None`` defers all naming the same way.
    """
    by_index = {i: s for i, s in enumerate(snippets)}
    clusters = []
    for label in range(clustering.k):
        idx = np.nonzero(clustering.assignments == label)[0]
        if len(idx) == 0:
            continue
        centroid = clustering.centroids[label]
        dist = np.linalg.norm(reduced[idx] - centroid, axis=1)
        order = sorted(range(len(idx)), key=lambda j: (dist[j], by_index[int(idx[j])].id))
        member_ids = [by_index[int(idx[j])].id for j in order]
        clusters.append((member_ids, centroid))

    clusters.sort(key=lambda c: (-len(c[0]), min(c[0])))

    out = []
    for position, (member_ids, centroid) in enumerate(clusters, start=1):
        rep_ids = member_ids[: config.n_representatives]
        reps = [store.get_snippet(sid) for sid in rep_ids]
        pending = False
        if gateway is None:
            name = f"Unnamed plan candidate {position}"
            pending = True
        else:
            try:
                name = gateway.name_cluster(reps)
            except (TransportError, MalformedResponseError) as exc:
                logger.warning("cluster naming failed (%s); storing placeholder", exc)
                name = f"Unnamed plan candidate {position}"
                pending = True
        out.append(store.add_candidate(
            domain_id=domain_id,
            name=name,
            snippet_ids=member_ids,
            centroid=[float(v) for v in centroid],
            representative_ids=rep_ids,
            pending_name=pending,
        ))
    return out
